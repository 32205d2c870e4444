#pragma once

// Local scaling constants: the trace inverse constant d, the complement
// constants a and b, the penalty gamma and the derived gamma_hat and c.

#include "eigbound/basis.hpp"
#include "eigbound/linalg.hpp"
#include "eigbound/mesh.hpp"
#include "eigbound/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

namespace detail {
/// Kronecker product with factors[0] acting on the fastest index.
inline Eigen::MatrixXd kron_axes(const std::vector<Eigen::MatrixXd>& factors) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& f : factors) {
    Eigen::MatrixXd next(out.rows() * f.rows(), out.cols() * f.cols());
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index j = 0; j < f.cols(); ++j)
        next.block(i * out.rows(), j * out.cols(), out.rows(), out.cols()) = f(i, j) * out;
    out = std::move(next);
  }
  return out;
}
}  // namespace detail

/// Tensor Lagrange polynomials of degree p on the element LGL grid of p + 1
/// nodes per axis, with exactly integrated matrices.
struct FineSpace {
  int degree = 0;
  Eigen::MatrixXd points;    // nodes x dim
  Eigen::MatrixXd mass;      // (., .)_k
  Eigen::MatrixXd boundary;  // (., .)_dk
  Eigen::MatrixXd energy;    // <<., .>>
  Eigen::RowVectorXd mean;   // Pi_0 of each nodal function

  Eigen::Index size() const { return points.rows(); }

  static FineSpace build(const Box& box, int degree) {
    if (degree < 1) throw std::invalid_argument("fine space degree must be at least 1");
    const int d = box.dim;
    const int n = degree + 1;
    const LobattoRule nodal = LobattoRule::make(n);
    const LobattoRule exact = LobattoRule::make(n + 1);
    const Eigen::MatrixXd interp = lagrange_matrix(nodal.nodes, exact.nodes);
    const Eigen::MatrixXd dinterp = interp * nodal.diff;
    const Eigen::MatrixXd ref_mass = interp.transpose() * exact.weights.asDiagonal() * interp;
    const Eigen::MatrixXd ref_stiff = dinterp.transpose() * exact.weights.asDiagonal() * dinterp;

    FineSpace f;
    f.degree = degree;
    std::vector<Eigen::MatrixXd> mass1(d), stiff1(d);
    for (int j = 0; j < d; ++j) {
      const double half = 0.5 * box.width[j];
      mass1[j] = half * ref_mass;
      stiff1[j] = ref_stiff / half;
    }
    f.mass = detail::kron_axes(mass1);
    const Eigen::Index nf = f.mass.rows();
    Eigen::MatrixXd stiff = Eigen::MatrixXd::Zero(nf, nf);
    f.boundary = Eigen::MatrixXd::Zero(nf, nf);
    for (int axis = 0; axis < d; ++axis) {
      std::vector<Eigen::MatrixXd> factors = mass1;
      factors[axis] = stiff1[axis];
      stiff += detail::kron_axes(factors);
      for (int side = 0; side < 2; ++side) {
        Eigen::MatrixXd point = Eigen::MatrixXd::Zero(n, n);
        point(side == 0 ? 0 : n - 1, side == 0 ? 0 : n - 1) = 1.0;
        factors = mass1;
        factors[axis] = point;
        f.boundary += detail::kron_axes(factors);
      }
    }
    const double vol = box.volume();
    f.mean = Eigen::RowVectorXd::Ones(nf) * f.mass / vol;
    f.energy = vol * f.mean.transpose() * f.mean + stiff;

    f.points.resize(nf, d);
    for (Eigen::Index k = 0; k < nf; ++k) {
      Eigen::Index rest = k;
      for (int j = 0; j < d; ++j) {
        const Eigen::Index i = rest % n;
        rest /= n;
        f.points(k, j) = box.lower[j] + 0.5 * box.width[j] * (nodal.nodes(i) + 1.0);
      }
    }
    return f;
  }
};

/// Trace inverse constant d: sqrt of the largest eigenvalue of the boundary
/// normal-gradient form against <<., .>> on V_N(k).
inline double compute_d(const ElementBasis& basis, const ElementGrid& grid,
                        Eigen::VectorXd* maximizer = nullptr) {
  const Eigen::Index n = basis.size();
  Eigen::MatrixXd normal_form = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t lf = 0; lf < grid.face_weights.size(); ++lf) {
    const Samples& tr = basis.field.faces.at(lf);
    if (!tr.has_gradient()) throw std::invalid_argument("compute_d: gradient traces missing");
    const Eigen::MatrixXd& dn = tr.gradient[face_axis(static_cast<int>(lf))];
    normal_form += dn.transpose() * grid.face_weights[lf].asDiagonal() * dn;
  }
  const double top = linalg::largest_generalized_eigenvalue(normal_form, basis.gram, maximizer);
  return std::sqrt(std::max(0.0, top));
}

struct ComplementConstants {
  double a = 0.0;
  double b = 0.0;
  Eigen::Index complement_dim = 0;
  double representation_error = 0.0;  // relative <<.,.>> Gram mismatch of V_N(k) in the fine space
};

/// a and b: largest ratios of ||v||_k and ||v||_dk to <<v>> over the
/// <<.,.>>-orthogonal complement of V_N(k) in the fine space.
inline ComplementConstants compute_ab(const ElementBasis& basis, const FineSpace& fine,
                                      Eigen::MatrixXd* complement = nullptr) {
  const Eigen::MatrixXd phi = basis.sample(fine.points, Derivs::value).value;
  const Eigen::Index nf = fine.size();
  const Eigen::Index nb = phi.cols();
  if (nf <= nb)
    throw std::invalid_argument("compute_ab: fine space (" + std::to_string(nf) +
                                " functions) is not richer than V_N(k) (" + std::to_string(nb) +
                                "); increase p_fine");
  ComplementConstants out;
  const Eigen::MatrixXd fine_gram = phi.transpose() * fine.energy * phi;
  out.representation_error =
      (fine_gram - basis.gram).lpNorm<Eigen::Infinity>() / std::max(1.0, basis.gram.lpNorm<Eigen::Infinity>());

  const Eigen::MatrixXd constraint = fine.energy * phi;  // nf x nb
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraint);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(nf, nf);
  const Eigen::MatrixXd z = q.rightCols(nf - nb);
  out.complement_dim = z.cols();
  const Eigen::MatrixXd e = z.transpose() * fine.energy * z;
  out.a = std::sqrt(std::max(0.0, linalg::largest_generalized_eigenvalue(
                                      z.transpose() * fine.mass * z, e)));
  out.b = std::sqrt(std::max(0.0, linalg::largest_generalized_eigenvalue(
                                      z.transpose() * fine.boundary * z, e)));
  if (complement) *complement = z;
  return out;
}

inline double compute_gamma(double d, double theta) {
  return 0.5 * (1.0 + theta) * (1.0 + theta) * d * d;
}

inline double c_kappa(double du, double d, double theta) { return du + d * std::abs(theta); }

/// max over the faces of k of the face average of gamma.
inline double gamma_hat(const Partition& mesh, const Eigen::VectorXd& gamma, std::size_t e) {
  double best = 0.0;
  for (int lf = 0; lf < mesh.faces_per_element(); ++lf)
    best = std::max(best, 0.5 * (gamma(e) + gamma(mesh.element(e).neighbors[lf])));
  return best;
}

struct ConstantOptions {
  double theta = 1.0;
  int fine_degree = 0;  // 0: quadrature order - 1
  double gamma_factor = 1.0;  // multiple of the coercivity threshold
  double representation_tol = 1e-8;
};

struct LocalConstants {
  double theta = 1.0;
  int fine_degree = 0;
  Eigen::VectorXd a, b, d, gamma, gamma_hat, c, du;
  Eigen::VectorXd representation_error;
  Eigen::VectorXi complement_dim;

  std::size_t size() const { return static_cast<std::size_t>(d.size()); }

  /// Replaces the d^u surrogate and updates c accordingly.
  void set_du(const Eigen::VectorXd& du_new) {
    du = du_new;
    for (Eigen::Index e = 0; e < d.size(); ++e) c(e) = c_kappa(du(e), d(e), theta);
  }
};

inline LocalConstants compute_constants(const Partition& mesh, const QuadGrid& quad,
                                        const BasisSet& basis, const ConstantOptions& opt = {}) {
  const std::size_t n = mesh.size();
  if (basis.elements.size() != n) throw std::invalid_argument("constants: basis/mesh mismatch");
  if (!(opt.gamma_factor >= 1.0))
    throw std::invalid_argument("constants: penalty factor below the coercivity threshold");
  LocalConstants k;
  k.theta = opt.theta;
  k.fine_degree = opt.fine_degree > 0 ? opt.fine_degree : quad.order() - 1;
  k.a.resize(n);
  k.b.resize(n);
  k.d.resize(n);
  k.representation_error.resize(n);
  k.complement_dim.resize(n);
  parallel_for(n, [&](std::size_t e) {
    k.d(e) = compute_d(basis.elements[e], quad.element(e));
    const FineSpace fine = FineSpace::build(mesh.element(e).box, k.fine_degree);
    const ComplementConstants ab = compute_ab(basis.elements[e], fine);
    k.a(e) = ab.a;
    k.b(e) = ab.b;
    k.representation_error(e) = ab.representation_error;
    k.complement_dim(e) = static_cast<int>(ab.complement_dim);
  });
  const double worst = k.representation_error.maxCoeff();
  if (!(worst <= opt.representation_tol))
    throw NumericalError("constants: V_N(k) is represented in the degree-" +
                         std::to_string(k.fine_degree) + " fine space only to " +
                         std::to_string(worst) + " (tolerance " +
                         std::to_string(opt.representation_tol) +
                         "); raise fine_degree or quadrature_order");
  k.gamma.resize(n);
  for (std::size_t e = 0; e < n; ++e) k.gamma(e) = opt.gamma_factor * compute_gamma(k.d(e), opt.theta);
  k.gamma_hat.resize(n);
  for (std::size_t e = 0; e < n; ++e) k.gamma_hat(e) = gamma_hat(mesh, k.gamma, e);
  k.c.resize(n);
  k.set_du(k.d);
  return k;
}

}  // namespace eigbound
