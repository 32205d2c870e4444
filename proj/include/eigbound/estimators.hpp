#pragma once

// Residual-type a posteriori estimators for DG eigenpairs: upper bound terms,
// bubble-based lower bound constants, high order terms and eigenvalue bounds.

#include "eigbound/basis.hpp"
#include "eigbound/constants.hpp"
#include "eigbound/dg.hpp"
#include "eigbound/fields.hpp"
#include "eigbound/mesh.hpp"
#include "eigbound/parallel.hpp"
#include "eigbound/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace eigbound {

namespace detail {
/// Applies op_0 (x) op_1 (x) ... to a tensor stored with axis 0 fastest.
inline Eigen::VectorXd tensor_apply(const Eigen::VectorXd& data, const std::vector<Eigen::MatrixXd>& ops) {
  Eigen::VectorXd cur = data;
  std::vector<Eigen::Index> shape;
  for (const auto& op : ops) shape.push_back(op.cols());
  for (std::size_t axis = 0; axis < ops.size(); ++axis) {
    Eigen::Index before = 1;
    for (std::size_t j = 0; j < axis; ++j) before *= shape[j];
    Eigen::Index after = 1;
    for (std::size_t j = axis + 1; j < ops.size(); ++j) after *= shape[j];
    const Eigen::MatrixXd& op = ops[axis];
    Eigen::VectorXd next(before * op.rows() * after);
    for (Eigen::Index a = 0; a < after; ++a) {
      const Eigen::Map<const Eigen::MatrixXd> in(cur.data() + a * before * shape[axis], before,
                                                 shape[axis]);
      Eigen::Map<Eigen::MatrixXd> out(next.data() + a * before * op.rows(), before, op.rows());
      out.noalias() = in * op.transpose();
    }
    cur = std::move(next);
    shape[axis] = op.rows();
  }
  return cur;
}
}  // namespace detail

/// R = lambda_N u_N + Lap u_N - V u_N (value and gradient) on each element.
struct Residual {
  std::vector<Eigen::VectorXd> value;
  std::vector<Eigen::MatrixXd> gradient;  // nodes x dim
};

inline Residual residual_field(const GridFunction& u, double lambda, const GridPotential& v,
                               Eigen::Index col = 0) {
  Residual r;
  for (std::size_t e = 0; e < u.elements.size(); ++e) {
    const Samples& s = u.elements[e].interior;
    if (!s.has_laplacian()) throw std::invalid_argument("residual: Laplacian samples missing");
    const Eigen::ArrayXd uv = s.value.col(col).array();
    r.value.push_back(lambda * uv + s.laplacian.col(col).array() - v.value[e].array() * uv);
    if (s.has_grad_laplacian()) {
      const Eigen::Index d = static_cast<Eigen::Index>(s.gradient.size());
      Eigen::MatrixXd g(s.points(), d);
      for (Eigen::Index j = 0; j < d; ++j)
        g.col(j) = lambda * s.gradient[j].col(col).array() + s.grad_laplacian[j].col(col).array() -
                   v.gradient[e].col(j).array() * uv - v.value[e].array() * s.gradient[j].col(col).array();
      r.gradient.push_back(std::move(g));
    }
  }
  return r;
}

/// g = prod_j sin^2(pi (x_j - a_j) / h_j) and its gradient at points.
struct Bubble {
  Eigen::VectorXd value;
  Eigen::MatrixXd gradient;
};

inline Bubble bubble(const Box& box, const Eigen::MatrixXd& points) {
  const int d = box.dim;
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd s(n, d), ds(n, d);
  for (int j = 0; j < d; ++j)
    for (Eigen::Index p = 0; p < n; ++p) {
      const double w = std::numbers::pi / box.width[j];
      const double t = w * (points(p, j) - box.lower[j]);
      s(p, j) = std::sin(t) * std::sin(t);
      ds(p, j) = 2.0 * w * std::sin(t) * std::cos(t);
    }
  Bubble b;
  b.value = s.rowwise().prod();
  b.gradient.resize(n, d);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd g = ds.col(j);
    for (int i = 0; i < d; ++i)
      if (i != j) g = g.cwiseProduct(s.col(i));
    b.gradient.col(j) = g;
  }
  return b;
}

struct BubbleSolution {
  Eigen::VectorXd value;
  Eigen::MatrixXd gradient;  // nodes x dim
};

/// Solves -Lap phi = rhs on the element with phi = 0 on its boundary, by a
/// sine expansion with `modes` terms per axis. `rhs` is sampled on the tensor
/// LGL grid of the element; sine coefficients come from that quadrature, which
/// aliases once `modes` approaches the node count.
inline BubbleSolution solve_bubble(const Box& box, const ElementGrid& grid, const LobattoRule& rule,
                                   const Eigen::VectorXd& rhs, int modes) {
  const int d = box.dim;
  const Eigen::Index q = rule.nodes.size();
  if (rhs.size() != grid.weights.size()) throw std::invalid_argument("bubble: rhs size mismatch");
  if (modes < 1) throw std::invalid_argument("bubble: at least one sine mode required");
  if (modes > q) throw std::invalid_argument("bubble: more sine modes than quadrature nodes");
  std::vector<Eigen::MatrixXd> sines(d), cosines(d), analysis(d);
  for (int j = 0; j < d; ++j) {
    const double h = box.width[j];
    sines[j].resize(q, modes);
    cosines[j].resize(q, modes);
    for (Eigen::Index i = 0; i < q; ++i) {
      const double x = 0.5 * h * (rule.nodes(i) + 1.0);
      for (int k = 1; k <= modes; ++k) {
        const double w = k * std::numbers::pi / h;
        sines[j](i, k - 1) = std::sin(w * x);
        cosines[j](i, k - 1) = w * std::cos(w * x);
      }
    }
    // sine coefficient = (2/h) * sum_i (h/2) w_i f_i sin(.)
    analysis[j] = sines[j].transpose() * rule.weights.asDiagonal();
  }
  const Eigen::VectorXd coeffs = detail::tensor_apply(rhs, analysis);
  Eigen::VectorXd scaled = coeffs;
  for (Eigen::Index idx = 0; idx < coeffs.size(); ++idx) {
    Eigen::Index rest = idx;
    double k2 = 0.0;
    for (int j = 0; j < d; ++j) {
      const double w = static_cast<double>(rest % modes + 1) * std::numbers::pi / box.width[j];
      rest /= modes;
      k2 += w * w;
    }
    scaled(idx) /= k2;
  }
  BubbleSolution out;
  out.value = detail::tensor_apply(scaled, sines);
  out.gradient.resize(grid.weights.size(), d);
  for (int j = 0; j < d; ++j) {
    std::vector<Eigen::MatrixXd> ops = sines;
    ops[j] = cosines[j];
    out.gradient.col(j) = detail::tensor_apply(scaled, ops);
  }
  return out;
}

struct ElementEstimate {
  double eta_r = 0.0, eta_f = 0.0, eta_j = 0.0;
  double c_r = 0.0, c_f = 0.0, c_j = 0.0;
  double xi = 0.0;
  double hot_lb = std::numeric_limits<double>::quiet_NaN();
  double residual_norm = 0.0;      // ||R||_k
  double residual_half_norm = 0.0; // ||g^(1/2) R||_k
  double bubble_residual_norm = 0.0;  // ||g R||_k
  double bubble_gradient_norm = 0.0;  // ||grad(g R - phi_k)||_k
  double du = 0.0;
  bool zero_residual = false;

  double sum() const { return eta_r + eta_f + eta_j; }
};

struct PairEstimate {
  double lambda_n = 0.0;
  std::vector<ElementEstimate> elements;
  double eta = 0.0;
  double xi = 0.0;
  double xi_denominator = 0.0;
  bool xi_flag = false;  // all lower-bound denominators vanished
  double hot_ub = std::numeric_limits<double>::quiet_NaN();
  double hot_lb = std::numeric_limits<double>::quiet_NaN();
};

struct EstimatorBundle {
  std::vector<PairEstimate> pairs;
  Eigen::VectorXd b_omega;  // sqrt of max over faces of {b^2}
};

struct EstimatorOptions {
  int bubble_modes = 0;  // 0: half the quadrature order
};

/// b_omega(k)^2 = max over faces of (b_k^2 + b_k'^2) / 2.
inline Eigen::VectorXd b_omega(const Partition& mesh, const LocalConstants& k) {
  Eigen::VectorXd out(mesh.size());
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    double best = 0.0;
    for (int lf = 0; lf < mesh.faces_per_element(); ++lf) {
      const std::size_t n = mesh.element(e).neighbors[lf];
      best = std::max(best, 0.5 * (k.b(e) * k.b(e) + k.b(n) * k.b(n)));
    }
    out(e) = std::sqrt(best);
  }
  return out;
}

/// All reference-free estimator quantities for the columns of `u`.
/// `du` (elements x pairs) replaces the constants' d^u surrogate when given.
inline EstimatorBundle compute_estimators(const Partition& mesh, const QuadGrid& quad,
                                          const GridFunction& u, const Eigen::VectorXd& lambda,
                                          const GridPotential& v, const LocalConstants& k,
                                          const Eigen::MatrixXd* du = nullptr,
                                          const EstimatorOptions& opt = {}) {
  const std::size_t ne = mesh.size();
  const Eigen::Index m = lambda.size();
  if (u.cols() != m) throw std::invalid_argument("estimators: eigenvalue/eigenfunction count mismatch");
  if (du && (du->rows() != static_cast<Eigen::Index>(ne) || du->cols() != m))
    throw std::invalid_argument("estimators: d^u table has the wrong shape");
  const int modes = opt.bubble_modes > 0 ? opt.bubble_modes : std::max(1, quad.order() / 2);
  EstimatorBundle bundle;
  bundle.b_omega = b_omega(mesh, k);
  bundle.pairs.resize(m);

  std::vector<Bubble> bubbles(ne);
  for (std::size_t e = 0; e < ne; ++e) bubbles[e] = bubble(mesh.element(e).box, quad.element(e).points);

  parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
    PairEstimate& pe = bundle.pairs[i];
    pe.lambda_n = lambda(i);
    pe.elements.resize(ne);
    const Residual r = residual_field(u, lambda(i), v, static_cast<Eigen::Index>(i));
    auto du_of = [&](std::size_t e) { return du ? (*du)(e, i) : k.du(e); };
    for (std::size_t e = 0; e < ne; ++e) {
      ElementEstimate& est = pe.elements[e];
      const ElementGrid& g = quad.element(e);
      const Eigen::ArrayXd w = g.weights.array();
      const Eigen::ArrayXd rv = r.value[e].array();
      const Eigen::ArrayXd gv = bubbles[e].value.array();
      est.du = du_of(e);
      est.residual_norm = std::sqrt((rv.square() * w).sum());
      est.residual_half_norm = std::sqrt((gv * rv.square() * w).sum());
      est.bubble_residual_norm = std::sqrt(((gv * rv).square() * w).sum());

      double flux = 0.0, jump = 0.0;
      for (int lf = 0; lf < mesh.faces_per_element(); ++lf) {
        const auto& fw = g.face_weights[lf].array();
        flux += (normal_gradient_jump_from(u, mesh, e, lf, i).array().square() * fw).sum();
        jump += (jump_from(u, mesh, e, lf, i).array().square() * fw).sum();
      }
      const double c = c_kappa(est.du, k.d(e), k.theta);
      est.eta_r = k.a(e) * est.residual_norm;
      est.eta_f = 0.5 * k.b(e) * std::sqrt(flux);
      est.eta_j = (k.b(e) * k.gamma_hat(e) + 0.5 * c) * std::sqrt(jump);

      // Bubble problem -Lap phi = V g R and ||grad(g R - phi)||.
      if (r.gradient.empty()) throw std::invalid_argument("estimators: residual gradient needs grad-Laplacian samples");
      const Eigen::VectorXd rhs = (v.value[e].array() * gv * rv).matrix();
      const BubbleSolution phi = solve_bubble(mesh.element(e).box, g, quad.rule(), rhs, modes);
      double grad2 = 0.0;
      for (int j = 0; j < mesh.dim(); ++j) {
        const Eigen::ArrayXd dgr = bubbles[e].gradient.col(j).array() * rv +
                                   gv * r.gradient[e].col(j).array() - phi.gradient.col(j).array();
        grad2 += (dgr.square() * w).sum();
      }
      est.bubble_gradient_norm = std::sqrt(grad2);

      const double half2 = est.residual_half_norm * est.residual_half_norm;
      est.zero_residual = !(half2 > 0.0) || !std::isfinite(half2);
      est.c_r = est.zero_residual ? 0.0
                                  : k.a(e) * est.residual_norm * est.bubble_gradient_norm / half2;
      double du_max = 0.0;
      for (std::size_t n : mesh.patch(e)) du_max = std::max(du_max, du_of(n));
      est.c_f = k.b(e) * std::sqrt(0.5 * static_cast<double>(mesh.patch(e).size())) * du_max;
      est.c_j = k.gamma(e) > 0.0 ? std::sqrt(2.0 / k.gamma(e)) * (k.b(e) * k.gamma_hat(e) + 0.5 * c)
                                 : 0.0;
      const double num = (est.zero_residual ? 0.0 : est.eta_r) + est.eta_f + est.eta_j;
      const double den = est.c_r + est.c_f + est.c_j;
      est.xi = den > 0.0 ? num / den : 0.0;
    }

    double eta2 = 0.0, worst = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      const ElementEstimate& est = pe.elements[e];
      eta2 += est.sum() * est.sum();
      const double bo = bundle.b_omega(e) * est.du;
      worst = std::max(worst, est.c_r * est.c_r + bo * bo + est.c_j * est.c_j);
    }
    pe.eta = std::sqrt(eta2);
    pe.xi_denominator = 3.0 * worst;
    pe.xi_flag = !(pe.xi_denominator > 0.0);
    pe.xi = pe.xi_flag ? 0.0 : std::sqrt(eta2 / pe.xi_denominator);
  });
  return bundle;
}

/// hot^ub = ((lambda' + lambda_N') / 2) ||u - u_N||^2 / |||u - u_N|||, with
/// eigenvalues shifted by the same V_m as the energy norm.
inline double hot_ub(double lambda, double lambda_n, double l2_error, double energy_error,
                     double shift) {
  if (!(energy_error > 0.0)) return 0.0;
  return 0.5 * ((lambda - shift) + (lambda_n - shift)) * l2_error * l2_error / energy_error;
}

/// Fills hot_k^lb, hot^lb and hot^ub of one pair from the aligned reference.
inline void add_reference_terms(PairEstimate& pe, const Partition& mesh, const QuadGrid& quad,
                                const GridFunction& u_ref, double lambda_ref,
                                const GridFunction& u_aligned, double l2_error,
                                double energy_error, double shift, Eigen::Index col = 0) {
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    ElementEstimate& est = pe.elements[e];
    const Eigen::ArrayXd diff = pe.lambda_n * u_aligned.elements[e].interior.value.col(col).array() -
                                lambda_ref * u_ref.elements[e].interior.value.col(col).array();
    const double dn = std::sqrt((diff.square() * quad.element(e).weights.array()).sum());
    est.hot_lb = est.bubble_gradient_norm > 0.0
                     ? dn * est.bubble_residual_norm / est.bubble_gradient_norm
                     : 0.0;
    sum += est.hot_lb * est.hot_lb;
  }
  pe.hot_lb = std::sqrt(sum);
  pe.hot_ub = hot_ub(lambda_ref, pe.lambda_n, l2_error, energy_error, shift);
}

/// True d^u_k = ||grad e . n||_dk / ||grad e||_k of the error e (one column).
inline Eigen::VectorXd true_du(const GridFunction& error, const Partition& mesh, const QuadGrid& quad,
                               Eigen::Index col = 0) {
  Eigen::VectorXd out(mesh.size());
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const ElementGrid& g = quad.element(e);
    const Samples& s = error.elements[e].interior;
    double vol = 0.0;
    for (int j = 0; j < mesh.dim(); ++j)
      vol += (s.gradient[j].col(col).array().square() * g.weights.array()).sum();
    double bnd = 0.0;
    for (int lf = 0; lf < mesh.faces_per_element(); ++lf)
      bnd += (error.elements[e].faces[lf].gradient[face_axis(lf)].col(col).array().square() *
              g.face_weights[lf].array())
                 .sum();
    out(e) = vol > 0.0 ? std::sqrt(bnd / vol) : 0.0;
  }
  return out;
}

struct EigenvalueBounds {
  double upper = 0.0;  // eta^2
  double lower = 0.0;  // xi^2
  // Theorem forms, available with a reference.
  double upper_theorem = std::numeric_limits<double>::quiet_NaN();         // (8 gamma)^(1/2) factor
  double upper_theorem_stated = std::numeric_limits<double>::quiet_NaN();  // 2 gamma^(1/2) factor
  double lower_theorem_lhs = std::numeric_limits<double>::quiet_NaN();     // xi^2 / 2
  double lower_theorem_rhs = std::numeric_limits<double>::quiet_NaN();
};

struct ReferenceTerms {
  double lambda = 0.0;      // reference eigenvalue (unshifted)
  double l2_error = 0.0;    // ||u - u_N||_Omega
  double shift = 0.0;       // V_m
};

inline EigenvalueBounds eigenvalue_bounds(const PairEstimate& pe, const LocalConstants& k,
                                          const std::optional<ReferenceTerms>& ref = std::nullopt) {
  EigenvalueBounds b;
  b.upper = pe.eta * pe.eta;
  b.lower = pe.xi * pe.xi;
  if (!ref) return b;
  double factor = 1.0, stated = 1.0;
  for (std::size_t e = 0; e < pe.elements.size(); ++e) {
    const double g = k.gamma(static_cast<Eigen::Index>(e));
    if (!(g > 0.0)) continue;
    const double du = pe.elements[e].du;
    factor = std::max(factor, 1.0 + du * std::abs(1.0 + k.theta) / std::sqrt(8.0 * g));
    stated = std::max(stated, 1.0 + du * std::abs(1.0 + k.theta) / (2.0 * std::sqrt(g)));
  }
  const double hot = std::isfinite(pe.hot_ub) ? pe.hot_ub : 0.0;
  const double hot_lb = std::isfinite(pe.hot_lb) ? pe.hot_lb : 0.0;
  const double lam = ref->lambda - ref->shift;
  const double l2 = ref->l2_error * ref->l2_error;
  b.upper_theorem = factor * (pe.eta + hot) * (pe.eta + hot) + lam * l2;
  b.upper_theorem_stated = stated * (pe.eta + hot) * (pe.eta + hot) + lam * l2;
  b.lower_theorem_lhs = 0.5 * b.lower;
  b.lower_theorem_rhs = std::abs(pe.lambda_n - ref->lambda) + lam * l2 + 0.5 * hot_lb * hot_lb;
  return b;
}

/// Both sides of the error representation with phi_N = Pi_N phi.
struct ErrorRepresentation {
  double energy_error = 0.0;  // left-hand side
  double residual_term = 0.0;
  double flux_term = 0.0;
  double jump_term = 0.0;
  double symmetry_term = 0.0;
  double hot = 0.0;
  double rhs() const { return residual_term + flux_term + jump_term + symmetry_term + hot; }
  double residual() const { return std::abs(rhs() - energy_error); }
};

inline ErrorRepresentation error_representation(const Partition& mesh, const QuadGrid& quad,
                                                const BasisSet& basis, const LocalConstants& k,
                                                const GridPotential& v, const GridFunction& u_n,
                                                double lambda_n, const GridFunction& u_ref,
                                                double lambda_ref, Eigen::Index col_n = 0,
                                                Eigen::Index col_ref = 0) {
  ErrorRepresentation out;
  const GridFunction un = u_n.column(col_n);
  const GridFunction err = lincomb(1.0, u_ref.column(col_ref), -1.0, un);
  out.energy_error = energy_norm(err, mesh, quad, k, v);
  if (!(out.energy_error > 0.0)) return out;
  const double l2 = l2_norm(err, quad);
  out.hot = hot_ub(lambda_ref, lambda_n, l2, out.energy_error, v.minimum);

  const GridFunction phi = lincomb(1.0 / out.energy_error, err, 0.0, err);
  const Residual r = residual_field(un, lambda_n, v);
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const ElementBasis& be = basis.elements[e];
    const ElementGrid& g = quad.element(e);
    const Eigen::MatrixXd c = be.project(phi.elements[e].interior, g);
    const ElementField phin = be.field.combine(c);
    const Eigen::ArrayXd diff = phi.elements[e].interior.value.col(0).array() -
                                phin.interior.value.col(0).array();
    out.residual_term += (r.value[e].array() * diff * g.weights.array()).sum();
    for (int lf = 0; lf < mesh.faces_per_element(); ++lf) {
      const auto& fw = g.face_weights[lf].array();
      const int axis = face_axis(lf);
      const std::size_t nb = mesh.element(e).neighbors[lf];
      const Eigen::ArrayXd tdiff = phi.elements[e].faces[lf].value.col(0).array() -
                                   phin.faces[lf].value.col(0).array();
      const Eigen::ArrayXd jg = normal_gradient_jump_from(un, mesh, e, lf).array();
      const Eigen::ArrayXd ju = jump_from(un, mesh, e, lf).array();
      const double gavg = 0.5 * (k.gamma(e) + k.gamma(nb));
      const Eigen::ArrayXd dphi = outward_sign(lf) * phi.elements[e].faces[lf].gradient[axis].col(0).array();
      const Eigen::ArrayXd dphin = outward_sign(lf) * phin.faces[lf].gradient[axis].col(0).array();
      out.flux_term -= 0.5 * (jg * tdiff * fw).sum();
      out.jump_term -= gavg * (ju * tdiff * fw).sum();
      out.symmetry_term -= 0.5 * (ju * (dphi + k.theta * dphin) * fw).sum();
    }
  }
  return out;
}

}  // namespace eigbound
