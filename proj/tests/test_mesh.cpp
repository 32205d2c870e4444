#include "eigbound/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace eigbound;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST(Partition, OneDimensionalSevenElements) {
  const Partition p = Partition::build(1, {kTwoPi}, {7});
  EXPECT_EQ(p.size(), 7u);
  EXPECT_EQ(p.faces().size(), 7u);
  for (std::size_t e = 0; e < p.size(); ++e) {
    EXPECT_NEAR(p.element(e).box.width[0], kTwoPi / 7.0, 1e-15);
    EXPECT_EQ(p.patch(e).size(), 3u);
  }
}

TEST(Partition, TwoDimensionalFiveByFive) {
  const Partition p = Partition::build(2, {kTwoPi, kTwoPi}, {5, 5});
  EXPECT_EQ(p.size(), 25u);
  EXPECT_EQ(p.faces().size(), 50u);
  for (std::size_t e = 0; e < p.size(); ++e) EXPECT_EQ(p.patch(e).size(), 5u);
}

TEST(Partition, RejectsDegenerateInput) {
  EXPECT_THROW(Partition::build(1, {1.0}, {1}), std::invalid_argument);
  EXPECT_THROW(Partition::build(1, {1.0}, {2}), std::invalid_argument);
  EXPECT_THROW(Partition::build(1, {-1.0}, {4}), std::invalid_argument);
  EXPECT_THROW(Partition::build(4, {1, 1, 1, 1}, {3, 3, 3, 3}), std::invalid_argument);
  EXPECT_THROW(Partition::build(2, {1.0}, {3}), std::invalid_argument);
}

TEST(Partition, ElementsTileTheDomain) {
  const Partition p = Partition::build(3, {1.0, 2.0, 3.0}, {3, 4, 5});
  double vol = 0.0;
  for (const Element& el : p.elements()) vol += el.box.volume();
  EXPECT_NEAR(vol, 6.0, 1e-13 * 6.0);
  // no overlap: lower corners are distinct grid points
  std::set<std::array<int, kMaxDim>> seen;
  for (const Element& el : p.elements()) EXPECT_TRUE(seen.insert(el.index).second);
}

TEST(Partition, FacePairingIsAnInvolution) {
  const Partition p = Partition::build(2, {kTwoPi, 3.0}, {4, 3});
  for (std::size_t e = 0; e < p.size(); ++e)
    for (int lf = 0; lf < p.faces_per_element(); ++lf) {
      const std::size_t n = p.element(e).neighbors[lf];
      EXPECT_EQ(p.element(n).neighbors[opposite_face(lf)], e);
      EXPECT_EQ(p.element(n).faces[opposite_face(lf)], p.element(e).faces[lf]);
    }
}

TEST(Partition, EveryFaceOnceWithLowerElementNormal) {
  const Partition p = Partition::build(2, {1.0, 1.0}, {3, 4});
  std::vector<int> hits(p.faces().size(), 0);
  for (std::size_t e = 0; e < p.size(); ++e)
    for (int lf = 0; lf < p.faces_per_element(); ++lf) ++hits[p.element(e).faces[lf]];
  for (int h : hits) EXPECT_EQ(h, 2);
  for (const Face& f : p.faces()) {
    EXPECT_LT(f.first, f.second);
    EXPECT_EQ(f.normal_sign, static_cast<int>(outward_sign(f.first_local)));
    EXPECT_EQ(p.element(f.first).neighbors[f.first_local], f.second);
  }
}

TEST(Partition, PeriodicWrapPairsOppositeSides) {
  const Partition p = Partition::build(1, {kTwoPi}, {7});
  EXPECT_EQ(p.element(0).neighbors[local_face(0, 0)], 6u);
  EXPECT_EQ(p.element(6).neighbors[local_face(0, 1)], 0u);
}

TEST(Partition, PatchSymmetry) {
  const Partition p = Partition::build(2, {1.0, 1.0}, {3, 5});
  for (std::size_t e = 0; e < p.size(); ++e)
    for (std::size_t n : p.patch(e)) {
      const auto& back = p.patch(n);
      EXPECT_NE(std::find(back.begin(), back.end(), e), back.end());
    }
}

TEST(Lobatto, ExactForPolynomialsUpToDegree2nMinus3) {
  for (int n : {2, 5, 8, 20, 48}) {
    const LobattoRule r = LobattoRule::make(n);
    EXPECT_NEAR(r.weights.sum(), 2.0, 1e-14);
    for (int k = 0; k <= 2 * n - 3; ++k) {
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      EXPECT_NEAR((r.weights.array() * r.nodes.array().pow(k)).sum(), exact, 1e-13) << n << " " << k;
    }
  }
}

TEST(Lobatto, DifferentiationMatrixIsExactOnPolynomials) {
  const LobattoRule r = LobattoRule::make(12);
  const Eigen::VectorXd f = r.nodes.array().pow(7) - 2.0 * r.nodes.array().square();
  const Eigen::VectorXd df = 7.0 * r.nodes.array().pow(6) - 4.0 * r.nodes.array();
  EXPECT_LT((r.diff * f - df).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Lobatto, LagrangeMatrixInterpolatesPolynomials) {
  const LobattoRule r = LobattoRule::make(9);
  Eigen::VectorXd t(5);
  t << -1.0, -0.3, 0.0, 0.77, 1.0;
  const Eigen::MatrixXd l = lagrange_matrix(r.nodes, t);
  const Eigen::VectorXd f = r.nodes.array().pow(8) + r.nodes.array();
  const Eigen::VectorXd exact = t.array().pow(8) + t.array();
  EXPECT_LT((l * f - exact).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(QuadGrid, IntegratesConstantAndSineSquared) {
  const Partition p = Partition::build(1, {kTwoPi}, {7});
  const QuadGrid q = QuadGrid::build(p, 20);
  EXPECT_NEAR(q.integrate([](const auto&) { return 1.0; }), kTwoPi, 1e-14);
  EXPECT_NEAR(q.integrate([](const auto& x) { return std::pow(std::sin(x(0)), 2); }), std::numbers::pi,
              1e-12);
}

TEST(QuadGrid, PolynomialExactOnUnitElement) {
  const Partition p = Partition::build(1, {3.0}, {3});
  const QuadGrid q = QuadGrid::build(p, 8);
  const ElementGrid& g = q.element(0);
  EXPECT_NEAR((g.weights.array() * g.points.col(0).array().square()).sum(), 1.0 / 3.0, 1e-14);
}

TEST(QuadGrid, WeightSumsMatchMeasures) {
  const Partition p = Partition::build(2, {kTwoPi, 2.0}, {5, 4});
  const QuadGrid q = QuadGrid::build(p, 10);
  for (std::size_t e = 0; e < p.size(); ++e) {
    const Box& b = p.element(e).box;
    const ElementGrid& g = q.element(e);
    EXPECT_NEAR(g.weights.sum(), b.volume(), 1e-14);
    for (int lf = 0; lf < 4; ++lf) EXPECT_NEAR(g.face_weights[lf].sum(), b.face_measure(face_axis(lf)), 1e-14);
  }
}

TEST(QuadGrid, OneDimensionalFacesArePointsOfUnitWeight) {
  const Partition p = Partition::build(1, {1.0}, {4});
  const QuadGrid q = QuadGrid::build(p, 6);
  for (int lf = 0; lf < 2; ++lf) {
    ASSERT_EQ(q.element(1).face_weights[lf].size(), 1);
    EXPECT_DOUBLE_EQ(q.element(1).face_weights[lf](0), 1.0);
  }
  EXPECT_DOUBLE_EQ(q.element(1).face_points[0](0, 0), 0.25);
  EXPECT_DOUBLE_EQ(q.element(1).face_points[1](0, 0), 0.5);
}

TEST(QuadGrid, FaceNodesMatchAcrossNeighbors) {
  const Partition p = Partition::build(2, {1.0, 1.0}, {3, 3});
  const QuadGrid q = QuadGrid::build(p, 7);
  for (std::size_t e = 0; e < p.size(); ++e)
    for (int lf = 0; lf < 4; ++lf) {
      const std::size_t n = p.element(e).neighbors[lf];
      const Eigen::MatrixXd& a = q.element(e).face_points[lf];
      const Eigen::MatrixXd& b = q.element(n).face_points[opposite_face(lf)];
      const int tangential = 1 - face_axis(lf);
      EXPECT_LT((a.col(tangential) - b.col(tangential)).cwiseAbs().maxCoeff(), 1e-15);
      const double gap = std::fmod(std::abs(a(0, face_axis(lf)) - b(0, face_axis(lf))), 1.0);
      EXPECT_LT(std::min(gap, 1.0 - gap), 1e-14);
    }
}

TEST(QuadGrid, RejectsLowOrder) {
  const Partition p = Partition::build(1, {1.0}, {3});
  EXPECT_THROW(QuadGrid::build(p, 1), std::invalid_argument);
}
