#include "eigbound/checks.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace eigbound;
using namespace eigbound::testing;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

const RunResult& run1d() {
  static const RunResult r = run_pipeline(preset("paper-1d"), 6);
  return r;
}

GridPotential zero_potential(const QuadGrid& quad) {
  GridPotential g;
  for (std::size_t e = 0; e < quad.size(); ++e) {
    g.value.push_back(Eigen::VectorXd::Zero(quad.element(e).points.rows()));
    g.gradient.push_back(Eigen::MatrixXd::Zero(quad.element(e).points.rows(), quad.element(e).points.cols()));
  }
  return g;
}

GridPotential shifted(const GridPotential& v, double c) {
  GridPotential g = v;
  for (auto& x : g.value) x.array() += c;
  g.minimum += c;
  return g;
}

double max_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}
}  // namespace

TEST(Assembly, StiffnessSymmetricMassPositiveDefinite) {
  const DiscreteOperator& op = run1d().op;
  EXPECT_LT(max_rel(op.stiffness, op.stiffness.transpose()), 1e-12);
  EXPECT_LT(max_rel(op.mass, op.mass.transpose()), 1e-14);
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(op.mass).info(), Eigen::Success);
  // The element bases are L2-orthonormal.
  EXPECT_LT(max_rel(op.mass, Eigen::MatrixXd::Identity(op.dofs(), op.dofs())), 1e-10);
}

TEST(Assembly, CouplesOnlyFaceNeighbors) {
  const RunResult& r = run1d();
  for (std::size_t e = 0; e < r.mesh.size(); ++e)
    for (std::size_t f = 0; f < r.mesh.size(); ++f) {
      bool coupled = e == f;
      for (int lf = 0; lf < r.mesh.faces_per_element(); ++lf) coupled = coupled || r.mesh.element(e).neighbors[lf] == f;
      if (coupled) continue;
      const auto block = r.op.stiffness.block(r.op.offsets[e], r.op.offsets[f], r.op.sizes[e], r.op.sizes[f]);
      EXPECT_EQ(block.cwiseAbs().maxCoeff(), 0.0) << e << "," << f;
    }
}

TEST(Assembly, MatchesFieldEvaluationOfTheForm) {
  const RunResult& r = run1d();
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd c(r.op.dofs(), 3);
  for (auto& x : c.reshaped()) x = normal(rng);
  const GridFunction v = r.basis.expand(c);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double direct = evaluate_bilinear(v, v, r.mesh, r.quad, r.constants, r.grid_potential, 0.0, i, j);
      const double matrix = c.col(i).dot(r.op.stiffness * c.col(j));
      EXPECT_NEAR(direct, matrix, 1e-10 * (1.0 + std::abs(matrix)));
    }
}

TEST(Assembly, Matches2DFieldEvaluation) {
  RunConfig cfg = preset("paper-2d");
  cfg.counts = {3, 3};
  cfg.quadrature_order = 16;
  cfg.fine_degree = 15;
  cfg.alb_wavecount = {15, 15};
  cfg.representation_tol = 1e-4;
  RunResult r = run_constants(cfg, 5);
  r.op = assemble(r.mesh, r.quad, r.basis, r.grid_potential, r.constants);
  std::mt19937_64 rng(22);
  std::normal_distribution<double> normal;
  Eigen::VectorXd c(r.op.dofs());
  for (auto& x : c) x = normal(rng);
  const GridFunction v = r.basis.expand(c);
  const double direct = evaluate_bilinear(v, v, r.mesh, r.quad, r.constants, r.grid_potential);
  EXPECT_NEAR(direct, c.dot(r.op.stiffness * c), 1e-10 * std::abs(direct));
  EXPECT_LT(max_rel(r.op.stiffness, r.op.stiffness.transpose()), 1e-12);
}

TEST(Form, SmoothFieldWithoutPotentialGivesDirichletEnergy) {
  const RunResult& r = run1d();
  const GridFunction v = GridFunction::sample(r.quad, sine_1d(3.0), Derivs::gradient);
  const double a = evaluate_bilinear(v, v, r.mesh, r.quad, r.constants, zero_potential(r.quad));
  EXPECT_NEAR(a, 9.0 * std::numbers::pi, 1e-10);
}

TEST(Form, ShiftEntersAsMass) {
  const RunResult& r = run1d();
  const GridPotential v2 = shifted(r.grid_potential, 4.0);
  const DiscreteOperator op = assemble(r.mesh, r.quad, r.basis, v2, r.constants);
  EXPECT_LT(max_rel(op.stiffness, r.op.stiffness + 4.0 * r.op.mass), 1e-12);
  const EigenSolution s = solve_eig(op, r.basis, 5);
  EXPECT_LT((s.eigenvalues - r.solution.eigenvalues.head(5) - Eigen::VectorXd::Constant(5, 4.0)).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(Solve, EigenpairsSatisfyTheGeneralizedProblem) {
  const RunResult& r = run1d();
  const EigenSolution& s = r.solution;
  const Eigen::MatrixXd res = r.op.stiffness * s.coeffs - r.op.mass * s.coeffs * s.eigenvalues.asDiagonal();
  EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-9 * r.op.stiffness.cwiseAbs().maxCoeff());
  const Eigen::Index m = s.eigenvalues.size();
  EXPECT_LT(max_rel(s.coeffs.transpose() * r.op.mass * s.coeffs, Eigen::MatrixXd::Identity(m, m)), 1e-12);
  for (Eigen::Index i = 1; i < m; ++i) EXPECT_LE(s.eigenvalues(i - 1), s.eigenvalues(i));
  EXPECT_THROW(solve_eig(r.op, r.basis, r.op.dofs() + 1), std::invalid_argument);
  EXPECT_THROW(solve_eig(r.op, r.basis, 0), std::invalid_argument);
}

TEST(Solve, FreeProblemHasZeroGroundState) {
  PotentialSpec free;
  free.dim = 1;
  free.lengths = {kTwoPi};
  const Partition mesh = Partition::build(1, {kTwoPi}, {5});
  const QuadGrid quad = QuadGrid::build(mesh, 24);
  const BasisSet basis = generate_alb(mesh, quad, Potential(free), {4, {33}, 1e-8});
  const LocalConstants k = compute_constants(mesh, quad, basis);
  const GridPotential v = zero_potential(quad);
  const EigenSolution s = solve_eig(assemble(mesh, quad, basis, v, k), basis, 3);
  EXPECT_NEAR(s.eigenvalues(0), 0.0, 1e-10);
  // Constant ground state, no jumps.
  EXPECT_LT(energy_norm(s.fields, mesh, quad, k, v), 1e-6);
}

TEST(EnergyNorm, ConstantFunction) {
  const RunResult& r = run1d();
  const GridFunction one = GridFunction::sample(r.quad, constant_one(), Derivs::gradient);
  double expect = 0.0;
  for (std::size_t e = 0; e < r.mesh.size(); ++e)
    expect += ((r.grid_potential.value[e].array() - r.grid_potential.minimum) * r.quad.element(e).weights.array()).sum();
  const double e2 = energy_norm(one, r.mesh, r.quad, r.constants, r.grid_potential);
  EXPECT_NEAR(e2 * e2, expect, 1e-12 * expect);
}

TEST(EnergyNorm, JumpTermUsesHalfPenaltyPerSide) {
  const Partition mesh = Partition::build(1, {3.0}, {3});
  const QuadGrid quad = QuadGrid::build(mesh, 6);
  LocalConstants k;
  k.theta = 1.0;
  k.gamma = Eigen::Vector3d(2.0, 4.0, 6.0);
  const GridPotential v = zero_potential(quad);
  // 1 on the middle element only: jumps of 1 on its two faces.
  const GridFunction f = sample_broken(quad, [](std::size_t e) {
    return e == 1 ? constant_one() : analytic([](const auto&) { return 0.0; },
                                              [](const auto& x) { return Eigen::RowVectorXd::Zero(x.size()); });
  }, Derivs::gradient);
  const Eigen::VectorXd s = energy_norm_squares(f, mesh, quad, k, v);
  EXPECT_NEAR(s(0), 0.5 * 2.0, 1e-14);
  EXPECT_NEAR(s(1), 0.5 * 4.0 * 2.0, 1e-14);
  EXPECT_NEAR(s(2), 0.5 * 6.0, 1e-14);
}

TEST(Consistency, ExactEigenfunctionsSatisfyTheDiscreteForm) {
  const RunResult& r = run1d();
  const ReferenceSolution& ref = *r.reference;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < r.solution.fields.cols(); ++j) {
      const double a = evaluate_bilinear(ref.fields, r.solution.fields, r.mesh, r.quad, r.constants,
                                         r.grid_potential, 0.0, i, j);
      double mass = 0.0;
      for (std::size_t e = 0; e < r.mesh.size(); ++e) mass += inner_elem(ref.fields, r.solution.fields, r.quad, e, i, j);
      worst = std::max(worst, std::abs(a - ref.eigenvalues(i) * mass) / (1.0 + std::abs(ref.eigenvalues(i))));
    }
  EXPECT_LT(worst, 1e-8);
}

TEST(Consistency, EigenvalueErrorIdentity) {
  const RunResult& r = run1d();
  for (Eigen::Index i = 0; i < 4; ++i) {
    const GridFunction e = lincomb(1.0, r.reference->fields.column(i), -1.0, r.aligned->column(i));
    const double aee = evaluate_bilinear(e, e, r.mesh, r.quad, r.constants, r.grid_potential);
    const double l2 = r.errors[i].err_l2;
    const double rhs = r.solution.eigenvalues(i) - r.reference->eigenvalues(i) + r.reference->eigenvalues(i) * l2 * l2;
    EXPECT_NEAR(aee, rhs, 1e-8 * std::max(1.0, std::abs(aee))) << "pair " << i + 1;
  }
}

TEST(Coercivity, ShiftedFormDominatesHalfEnergy) {
  const Check c = check_coercivity(run1d(), 200, 3);
  EXPECT_TRUE(c.passed) << c.value;
}

TEST(Coercivity, BasisFunctionsHavePositiveEnergy) {
  const RunResult& r = run1d();
  const GridFunction phi = r.basis.expand(Eigen::MatrixXd::Identity(r.op.dofs(), r.op.dofs()));
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    const double e2 = energy_norm_squares(phi, r.mesh, r.quad, r.constants, r.grid_potential, j).sum();
    const double a = r.op.stiffness(j, j) - r.grid_potential.minimum * r.op.mass(j, j);
    EXPECT_GE(a, 0.5 * e2 * (1.0 - 1e-10));
  }
}
