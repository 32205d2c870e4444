#include "eigbound/pipeline.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace eigbound;
using namespace eigbound::testing;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Alb1D {
  RunConfig cfg = preset("paper-1d");
  Partition mesh = Partition::build(1, cfg.lengths, cfg.counts);
  QuadGrid quad = QuadGrid::build(mesh, cfg.quadrature_order);
  Potential v{cfg.potential};
  BasisSet basis = generate_alb(mesh, quad, v, {6, cfg.alb_wavecount, cfg.drop_tol});
};

Alb1D& alb() {
  static Alb1D a;
  return a;
}
}  // namespace

TEST(Orthonormalize, IdentityUpToSign) {
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(5, 2.0);
  const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(5, 3);
  const Orthonormalized o = orthonormalize(v, w);
  ASSERT_EQ(o.coeffs.cols(), 3);
  const Eigen::MatrixXd q = v * o.coeffs;
  EXPECT_LT((q.transpose() * w.asDiagonal() * q - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((q.cwiseAbs() - v / std::sqrt(2.0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Orthonormalize, DropsDependentCandidates) {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(20, 0.0, 1.0);
  Eigen::MatrixXd v(20, 3);
  v.col(0) = x.array().sin();
  v.col(1) = 2.0 * v.col(0);
  v.col(2) = x.array().cos();
  const Orthonormalized o = orthonormalize(v, Eigen::VectorXd::Ones(20));
  EXPECT_EQ(o.coeffs.cols(), 2);
  ASSERT_EQ(o.dropped.size(), 1u);
  EXPECT_EQ(o.dropped[0], 1);
  EXPECT_EQ(o.kept, (std::vector<Eigen::Index>{0, 2}));
}

TEST(Orthonormalize, RandomCandidatesGiveIdentityGram) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.1, 1.0);
  Eigen::MatrixXd v(60, 12);
  for (auto& x : v.reshaped()) x = normal(rng);
  Eigen::VectorXd w(60);
  for (auto& x : w) x = uniform(rng);
  const Orthonormalized o = orthonormalize(v, w);
  ASSERT_EQ(o.coeffs.cols(), 12);
  const Eigen::MatrixXd q = v * o.coeffs;
  EXPECT_LT((q.transpose() * w.asDiagonal() * q - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Orthonormalize, EmptyInputThrows) {
  EXPECT_THROW(orthonormalize(Eigen::MatrixXd(10, 0), Eigen::VectorXd::Ones(10)), std::invalid_argument);
}

TEST(ProjectConstant, ClosedForms) {
  const Partition mesh = Partition::build(1, {3.0}, {3});
  const QuadGrid quad = QuadGrid::build(mesh, 16);
  const ElementGrid& g = quad.element(0);
  EXPECT_NEAR(project_constant(Eigen::VectorXd::Constant(g.weights.size(), 5.0), g)(0), 5.0, 1e-14);
  EXPECT_NEAR(project_constant(g.points.col(0), g)(0), 0.5, 1e-14);
  const Eigen::VectorXd s = (kTwoPi * g.points.col(0)).array().sin();
  EXPECT_NEAR(project_constant(s, g)(0), 0.0, 1e-14);
}

TEST(Alb, L2GramIsIdentityAndConstantRepresentable) {
  const Alb1D& a = alb();
  for (std::size_t e = 0; e < a.mesh.size(); ++e) {
    const ElementGrid& g = a.quad.element(e);
    const Eigen::MatrixXd& phi = a.basis.elements[e].field.interior.value;
    EXPECT_EQ(phi.cols(), 7);
    const Eigen::MatrixXd gram = phi.transpose() * g.weights.asDiagonal() * phi;
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-10) << "element " << e;
    const Samples one = constant_sampler(1)(g.points, Derivs::gradient);
    const Eigen::MatrixXd c = a.basis.elements[e].project(one, g);
    const Eigen::VectorXd back = phi * c;
    EXPECT_LT((back.array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(Alb, ProjectionReproducesBasisFunctions) {
  const Alb1D& a = alb();
  const ElementBasis& b = a.basis.elements[3];
  const Eigen::MatrixXd c = b.project(b.field.interior, a.quad.element(3));
  EXPECT_LT((c - Eigen::MatrixXd::Identity(c.rows(), c.cols())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Alb, FreePotentialSpansTrigonometricFunctions) {
  PotentialSpec free;
  free.dim = 1;
  free.lengths = {kTwoPi};
  const Partition mesh = Partition::build(1, {kTwoPi}, {6});
  const QuadGrid quad = QuadGrid::build(mesh, 24);
  // N = 5 on the extended element of width pi: 1, cos 2x, sin 2x, cos 4x, sin 4x.
  const BasisSet basis = generate_alb(mesh, quad, Potential(free), {5, {17}, 1e-8});
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const ElementGrid& g = quad.element(e);
    // The extra constant candidate duplicates the constant eigenfunction.
    EXPECT_EQ(basis.elements[e].size(), 5);
    EXPECT_EQ(basis.elements[e].dropped.size(), 1u);
    const Samples f = sine_1d(4.0)(g.points, Derivs::gradient);
    const Eigen::MatrixXd c = basis.elements[e].project(f, g);
    const Eigen::VectorXd back = basis.elements[e].field.interior.value * c;
    EXPECT_LT((back - f.value).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Alb, SizesAndOffsets) {
  const Alb1D& a = alb();
  const auto sizes = a.basis.sizes();
  ASSERT_EQ(sizes.size(), 7u);
  Eigen::Index total = 0;
  for (std::size_t e = 0; e < sizes.size(); ++e) {
    EXPECT_EQ(a.basis.offsets[e], total);
    total += sizes[e];
  }
  EXPECT_EQ(a.basis.total(), total);
}

TEST(Alb, RejectsBadOptions) {
  const Alb1D& a = alb();
  EXPECT_THROW(generate_alb(a.mesh, a.quad, a.v, {1, {65}, 1e-8}), std::invalid_argument);
  EXPECT_THROW(generate_alb(a.mesh, a.quad, a.v, {4, {64}, 1e-8}), std::invalid_argument);
}

TEST(Alb, GradientsMatchFiniteDifferences) {
  const Alb1D& a = alb();
  const ElementBasis& b = a.basis.elements[2];
  Eigen::MatrixXd x(1, 1);
  x << a.mesh.element(2).box.lower[0] + 0.37 * a.mesh.element(2).box.width[0];
  const double h = 1e-5;
  const Samples s = b.sample(x, Derivs::grad_laplacian);
  Eigen::MatrixXd xp = x.array() + h, xm = x.array() - h;
  const Samples sp = b.sample(xp, Derivs::gradient), sm = b.sample(xm, Derivs::gradient);
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const double scale = 1.0 + s.gradient[0].col(j).cwiseAbs().maxCoeff();
    EXPECT_NEAR(s.gradient[0](0, j), (sp.value(0, j) - sm.value(0, j)) / (2 * h), 1e-6 * scale);
    const double lap_fd = (sp.gradient[0](0, j) - sm.gradient[0](0, j)) / (2 * h);
    EXPECT_NEAR(s.laplacian(0, j), lap_fd, 1e-5 * (1.0 + std::abs(lap_fd)));
  }
}

TEST(Alb, EigenvalueErrorDecreasesWithN) {
  RunConfig cfg = preset("paper-1d");
  cfg.eigenpairs = 3;
  const ReferenceSolution ref = run_reference(cfg);
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {4, 6, 8, 10}) {
    const RunResult r = run_pipeline([&] {
      RunConfig c = cfg;
      c.skip_reference = true;
      return c;
    }(), n);
    const double err = std::abs(r.solution.eigenvalues(0) - ref.eigenvalues(0));
    EXPECT_LT(err, prev) << "N = " << n;
    prev = err;
  }
}
