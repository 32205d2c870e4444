#include "eigbound/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace eigbound;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

Box box_1d(double width = kTwoPi) {
  Box b;
  b.dim = 1;
  b.width[0] = width;
  return b;
}

Box box_2d() {
  Box b;
  b.dim = 2;
  b.width[0] = kTwoPi;
  b.width[1] = kTwoPi;
  return b;
}

PotentialSpec free_1d() {
  PotentialSpec p;
  p.dim = 1;
  p.lengths = {kTwoPi};
  return p;
}

// Direct sum over periodic images, written independently of the library.
double direct_gaussian_sum(const PotentialSpec& p, const Eigen::RowVectorXd& x) {
  double v = p.offset;
  for (const Gaussian& g : p.bumps)
    for (int i = -4; i <= 4; ++i)
      for (int j = (p.dim > 1 ? -4 : 0); j <= (p.dim > 1 ? 4 : 0); ++j) {
        double r2 = std::pow(x(0) - g.center[0] + i * p.lengths[0], 2);
        if (p.dim > 1) r2 += std::pow(x(1) - g.center[1] + j * p.lengths[1], 2);
        v += g.magnitude * std::exp(-0.5 * r2 / (g.width * g.width));
      }
  return v;
}
}  // namespace

TEST(Potential, MatchesDirectImageSum1D) {
  const PotentialSpec p = preset("paper-1d").potential;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  Eigen::MatrixXd pts(50, 1);
  for (auto& x : pts.reshaped()) x = u(rng);
  const Eigen::VectorXd v = sample_potential(p, pts);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    EXPECT_NEAR(v(i), direct_gaussian_sum(p, pts.row(i)), 1e-12 * 60.0);
}

TEST(Potential, MatchesDirectImageSum2D) {
  const PotentialSpec p = preset("paper-2d").potential;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  Eigen::MatrixXd pts(40, 2);
  for (auto& x : pts.reshaped()) x = u(rng);
  const Eigen::VectorXd v = sample_potential(p, pts);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    EXPECT_NEAR(v(i), direct_gaussian_sum(p, pts.row(i)), 1e-12 * 8.0);
}

TEST(Potential, GradientMatchesFiniteDifference) {
  const Potential v(preset("paper-2d").potential);
  Eigen::MatrixXd x(1, 2);
  x << 1.1, 4.3;
  const Samples s = v.sample(x, Derivs::gradient);
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Eigen::MatrixXd xp = x, xm = x;
    xp(0, j) += h;
    xm(0, j) -= h;
    const double fd = (v.sample(xp, Derivs::value).value(0, 0) - v.sample(xm, Derivs::value).value(0, 0)) / (2 * h);
    EXPECT_NEAR(s.gradient[j](0, 0), fd, 1e-7);
  }
}

TEST(Potential, ZeroMagnitudeGivesOffsetOnly) {
  PotentialSpec p = preset("paper-1d").potential;
  for (auto& g : p.bumps) g.magnitude = 0.0;
  p.offset = 0.0;
  Eigen::MatrixXd pts = Eigen::VectorXd::LinSpaced(17, 0.0, kTwoPi);
  EXPECT_EQ(sample_potential(p, pts).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Potential, IsPeriodic) {
  const PotentialSpec p = preset("paper-1d").potential;
  Eigen::MatrixXd a(3, 1), b(3, 1);
  a << 0.1, 1.7, 3.3;
  b = a.array() + kTwoPi;
  EXPECT_LT((sample_potential(p, a) - sample_potential(p, b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Potential, RejectsInvalidSpecs) {
  PotentialSpec p = preset("paper-1d").potential;
  p.bumps[0].width = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = preset("paper-1d").potential;
  p.lengths = {};
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Planewave, FreeSpectrum1D) {
  const PlanewaveSolution pw = solve_planewave(Potential(free_1d()), box_1d(), {33}, 11);
  for (Eigen::Index i = 0; i < 11; ++i) {
    const double k = static_cast<double>((i + 1) / 2);
    EXPECT_NEAR(pw.eigenvalues(i), k * k, 1e-12);
  }
}

TEST(Planewave, FreeSpectrumOnWiderBox) {
  const double l = 3.0;
  PotentialSpec p = free_1d();
  p.lengths = {l};
  const PlanewaveSolution pw = solve_planewave(Potential(p), box_1d(l), {21}, 5);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double k = kTwoPi / l * static_cast<double>((i + 1) / 2);
    EXPECT_NEAR(pw.eigenvalues(i), k * k, 1e-11);
  }
}

TEST(Planewave, FreeSpectrum2D) {
  PotentialSpec p;
  p.dim = 2;
  p.lengths = {kTwoPi, kTwoPi};
  const PlanewaveSolution pw = solve_planewave(Potential(p), box_2d(), {9, 9}, 13);
  // |k|^2 in ascending order with multiplicity: 0, 1 x4, 2 x4, 4 x4
  const double expect[13] = {0, 1, 1, 1, 1, 2, 2, 2, 2, 4, 4, 4, 4};
  for (Eigen::Index i = 0; i < 13; ++i) EXPECT_NEAR(pw.eigenvalues(i), expect[i], 1e-12);
}

TEST(Planewave, ConstantShiftMovesEigenvaluesOnly) {
  const RunConfig cfg = preset("paper-1d");
  PotentialSpec shifted = cfg.potential;
  shifted.offset += 2.5;
  const Box box = box_1d();
  const PlanewaveSolution a = solve_planewave(Potential(cfg.potential), box, {129}, 6);
  const PlanewaveSolution b = solve_planewave(Potential(shifted), box, {129}, 6);
  EXPECT_LT((b.eigenvalues - a.eigenvalues - Eigen::VectorXd::Constant(6, 2.5)).cwiseAbs().maxCoeff(), 1e-10);
  // The lowest eigenfunctions are nondegenerate: overlaps of magnitude one.
  const Partition mesh = Partition::build(1, {kTwoPi}, {7});
  const QuadGrid quad = QuadGrid::build(mesh, 32);
  const GridFunction fa = GridFunction::sample(quad, a.series.sampler(), Derivs::value);
  const GridFunction fb = GridFunction::sample(quad, b.series.sampler(), Derivs::value);
  const Eigen::MatrixXd s = overlap(fa, fb, quad);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(s(i, i)), 1.0, 1e-10);
}

TEST(Planewave, PresetHasThreeBoundStates) {
  const RunConfig cfg = preset("paper-1d");
  const PlanewaveSolution pw = solve_planewave(Potential(cfg.potential), box_1d(), {257}, 6);
  EXPECT_LT(pw.eigenvalues(2), 0.0);
  EXPECT_GT(pw.eigenvalues(3), 0.0);
}

TEST(Planewave, ConvergedUnderWavecountDoubling) {
  const RunConfig cfg = preset("paper-1d");
  const Potential v(cfg.potential);
  const PlanewaveSolution a = solve_planewave(v, box_1d(), {257}, 4);
  const PlanewaveSolution b = solve_planewave(v, box_1d(), {513}, 4);
  EXPECT_LT(std::abs(a.eigenvalues(0) - b.eigenvalues(0)), 1e-10);
}

TEST(Planewave, RejectsEvenWavecountAndTooManyPairs) {
  const Potential v(free_1d());
  EXPECT_THROW(solve_planewave(v, box_1d(), {32}, 3), std::invalid_argument);
  EXPECT_THROW(solve_planewave(v, box_1d(), {5}, 6), std::invalid_argument);
  EXPECT_THROW(solve_planewave(v, box_2d(), {5}, 1), std::invalid_argument);
}

TEST(FourierSeries, PureModeAndDerivatives) {
  // sin(3x) = (e^{3ix} - e^{-3ix}) / 2i
  const std::array<int, kMaxDim> kmax{4, 0, 0};
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(9, 1);
  const std::complex<double> i(0.0, 1.0);
  c(4 + 3, 0) = 1.0 / (2.0 * i);
  c(4 - 3, 0) = -1.0 / (2.0 * i);
  const FourierSeries f(box_1d(), kmax, c);
  Eigen::MatrixXd x(3, 1);
  x << 0.0, 0.4, 2.0;
  const Samples s = f.evaluate(x, Derivs::grad_laplacian);
  for (Eigen::Index p = 0; p < 3; ++p) {
    EXPECT_NEAR(s.value(p, 0), std::sin(3 * x(p)), 1e-14);
    EXPECT_NEAR(s.gradient[0](p, 0), 3 * std::cos(3 * x(p)), 1e-13);
    EXPECT_NEAR(s.laplacian(p, 0), -9 * std::sin(3 * x(p)), 1e-12);
    EXPECT_NEAR(s.grad_laplacian[0](p, 0), -27 * std::cos(3 * x(p)), 1e-12);
  }
  EXPECT_NEAR(s.gradient[0](0, 0), 3.0, 1e-13);
}

TEST(FourierSeries, LaplacianMatchesFiniteDifference) {
  const RunConfig cfg = preset("paper-2d");
  Box box = box_2d();
  const PlanewaveSolution pw = solve_planewave(Potential(cfg.potential), box, {15, 15}, 2);
  Eigen::MatrixXd x(1, 2);
  x << 2.1, 0.7;
  const Samples s = pw.series.evaluate(x, Derivs::laplacian);
  const double h = 1e-4;
  double fd = -4.0 * pw.series.evaluate(x, Derivs::value).value(0, 1);
  for (int j = 0; j < 2; ++j)
    for (double sgn : {-1.0, 1.0}) {
      Eigen::MatrixXd y = x;
      y(0, j) += sgn * h;
      fd += pw.series.evaluate(y, Derivs::value).value(0, 1);
    }
  fd /= h * h;
  EXPECT_NEAR(s.laplacian(0, 1), fd, 1e-5 * std::max(1.0, std::abs(fd)));
}

TEST(Reference, OrthonormalAndSolvesTheEquation) {
  const RunConfig cfg = preset("paper-1d");
  const Partition mesh = Partition::build(1, cfg.lengths, cfg.counts);
  const QuadGrid quad = QuadGrid::build(mesh, cfg.quadrature_order);
  const Potential v(cfg.potential);
  const ReferenceSolution ref = solve_reference(v, mesh, quad, {257}, 6);
  const Eigen::MatrixXd gram = overlap(ref.fields, ref.fields, quad);
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
  // -u'' + V u - lambda u, relative to |lambda| + max V
  const GridPotential gv = GridPotential::sample(v, quad);
  double worst = 0.0;
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const Samples& s = ref.fields.elements[e].interior;
    for (Eigen::Index i = 0; i < 6; ++i) {
      const Eigen::ArrayXd res = -s.laplacian.col(i).array() +
                                 (gv.value[e].array() - ref.eigenvalues(i)) * s.value.col(i).array();
      worst = std::max(worst, res.abs().maxCoeff() / (1.0 + std::abs(ref.eigenvalues(i))));
    }
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Lapack, LowestEigenpairsOfLargeSymmetricMatrix) {
  const Eigen::Index n = 400;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (auto& x : a.reshaped()) x = normal(rng);
  a = 0.5 * (a + a.transpose()).eval();
  const linalg::SymmetricEigen eig = linalg::lowest_eigenpairs(a, 20);
  const Eigen::MatrixXd res = a * eig.vectors - eig.vectors * eig.values.asDiagonal();
  EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-10 * a.cwiseAbs().maxCoeff() * n);
  EXPECT_LT((eig.vectors.transpose() * eig.vectors - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff(),
            1e-12);
  const Eigen::VectorXd all = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues();
  EXPECT_LT((eig.values - all.head(20)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Lapack, GeneralizedPairsAreMassOrthonormal) {
  const Eigen::Index n = 300;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n), r(n, n);
  for (auto& x : a.reshaped()) x = normal(rng);
  for (auto& x : r.reshaped()) x = normal(rng);
  a = 0.5 * (a + a.transpose()).eval();
  const Eigen::MatrixXd b = r * r.transpose() / n + Eigen::MatrixXd::Identity(n, n);
  const linalg::SymmetricEigen eig = linalg::lowest_generalized_eigenpairs(a, b, 10);
  const Eigen::MatrixXd res = a * eig.vectors - b * eig.vectors * eig.values.asDiagonal();
  EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((eig.vectors.transpose() * b * eig.vectors - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(),
            1e-10);
}
