#pragma once

// Element-local orthonormal basis sets, adaptive local basis (ALB)
// generation, and the element projections onto constants and onto V_N(k).

#include "eigbound/fields.hpp"
#include "eigbound/mesh.hpp"
#include "eigbound/parallel.hpp"
#include "eigbound/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

struct Orthonormalized {
  Eigen::MatrixXd coeffs;              // candidates x kept; basis = candidates * coeffs
  std::vector<Eigen::Index> kept;      // candidate index behind each basis column
  std::vector<Eigen::Index> dropped;   // candidates found linearly dependent
};

/// Weighted modified Gram-Schmidt (two passes) on the columns of `values`.
/// A candidate whose remainder norm falls below drop_tol times its own norm
/// is dropped.
inline Orthonormalized orthonormalize(const Eigen::MatrixXd& values, const Eigen::VectorXd& weights,
                                      double drop_tol = 1e-8) {
  const Eigen::Index n = values.cols();
  if (n == 0) throw std::invalid_argument("orthonormalize: no candidate functions");
  if (values.rows() != weights.size())
    throw std::invalid_argument("orthonormalize: samples do not match the weights");
  auto inner = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a.array() * b.array() * weights.array()).sum();
  };
  Orthonormalized out;
  std::vector<Eigen::VectorXd> q_samples;
  std::vector<Eigen::VectorXd> q_coeffs;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd v = values.col(j);
    Eigen::VectorXd c = Eigen::VectorXd::Unit(n, j);
    const double original = std::sqrt(std::max(0.0, inner(v, v)));
    if (!(original > 0.0) || !std::isfinite(original)) {
      out.dropped.push_back(j);
      continue;
    }
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < q_samples.size(); ++k) {
        const double p = inner(q_samples[k], v);
        v -= p * q_samples[k];
        c -= p * q_coeffs[k];
      }
    }
    const double remainder = std::sqrt(std::max(0.0, inner(v, v)));
    if (remainder < drop_tol * original) {
      out.dropped.push_back(j);
      continue;
    }
    q_samples.push_back(v / remainder);
    q_coeffs.push_back(c / remainder);
    out.kept.push_back(j);
  }
  out.coeffs.resize(n, static_cast<Eigen::Index>(q_coeffs.size()));
  for (std::size_t k = 0; k < q_coeffs.size(); ++k) out.coeffs.col(k) = q_coeffs[k];
  return out;
}

/// The function 1 with vanishing derivatives.
inline Sampler constant_sampler(int dim) {
  return [dim](const Eigen::MatrixXd& pts, Derivs level) {
    const Eigen::Index n = pts.rows();
    const int lvl = static_cast<int>(level);
    Samples s;
    s.value = Eigen::MatrixXd::Ones(n, 1);
    if (lvl >= 1) s.gradient.assign(dim, Eigen::MatrixXd::Zero(n, 1));
    if (lvl >= 2) s.laplacian = Eigen::MatrixXd::Zero(n, 1);
    if (lvl >= 3) s.grad_laplacian.assign(dim, Eigen::MatrixXd::Zero(n, 1));
    return s;
  };
}

/// Columns of `first` followed by the columns of `second`.
inline Sampler concat_samplers(Sampler first, Sampler second) {
  return [first = std::move(first), second = std::move(second)](const Eigen::MatrixXd& pts,
                                                                Derivs level) {
    return first(pts, level).append(second(pts, level));
  };
}

/// Tensor Lagrange interpolant of nodal values on the LGL grid of `box`
/// (axis 0 fastest). Values only: derivatives are never taken numerically.
inline Sampler nodal_sampler(const Box& box, const Eigen::VectorXd& rule_nodes,
                             Eigen::MatrixXd values) {
  return [box, rule_nodes, values = std::move(values)](const Eigen::MatrixXd& pts, Derivs level) {
    if (level != Derivs::value)
      throw std::invalid_argument("nodal sampler provides values only");
    const int d = box.dim;
    const Eigen::Index n = rule_nodes.size();
    std::vector<Eigen::MatrixXd> axes(d);
    for (int j = 0; j < d; ++j) {
      const Eigen::VectorXd t =
          ((pts.col(j).array() - box.lower[j]) / (0.5 * box.width[j]) - 1.0).matrix();
      axes[j] = lagrange_matrix(rule_nodes, t);
    }
    Eigen::MatrixXd interp(pts.rows(), values.rows());
    for (Eigen::Index p = 0; p < pts.rows(); ++p)
      for (Eigen::Index k = 0; k < values.rows(); ++k) {
        Eigen::Index rest = k;
        double w = 1.0;
        for (int j = 0; j < d; ++j) {
          w *= axes[j](p, rest % n);
          rest /= n;
        }
        interp(p, k) = w;
      }
    Samples s;
    s.value = interp * values;
    return s;
  };
}

/// Mean value of sampled functions over an element (Pi_0).
inline Eigen::RowVectorXd project_constant(const Eigen::MatrixXd& values, const ElementGrid& grid) {
  const double vol = grid.weights.sum();
  return (grid.weights.transpose() * values) / vol;
}

/// <<v, w>> = (Pi_0 v, Pi_0 w)_k + (grad v, grad w)_k for all column pairs.
inline Eigen::MatrixXd energy_inner(const Samples& v, const Samples& w, const ElementGrid& grid) {
  if (!v.has_gradient() || !w.has_gradient())
    throw std::invalid_argument("energy inner product needs gradient samples");
  const double vol = grid.weights.sum();
  Eigen::MatrixXd out = vol * project_constant(v.value, grid).transpose() *
                        project_constant(w.value, grid);
  for (std::size_t j = 0; j < v.gradient.size(); ++j)
    out += v.gradient[j].transpose() * grid.weights.asDiagonal() * w.gradient[j];
  return out;
}

/// Orthonormal basis of V_N(k) on one element together with the data needed
/// to resample it and to project onto it.
struct ElementBasis {
  Sampler candidates;
  Eigen::MatrixXd coeffs;
  ElementField field;  // interior up to grad-Laplacian; faces value and gradient
  Eigen::MatrixXd gram;  // <<phi_i, phi_j>>
  Eigen::LLT<Eigen::MatrixXd> gram_factor;
  std::vector<Eigen::Index> kept;
  std::vector<Eigen::Index> dropped;

  Eigen::Index size() const { return coeffs.cols(); }

  Samples sample(const Eigen::MatrixXd& points, Derivs level) const {
    return candidates(points, level).combine(coeffs);
  }
  Sampler sampler() const {
    return [c = candidates, k = coeffs](const Eigen::MatrixXd& pts, Derivs level) {
      return c(pts, level).combine(k);
    };
  }

  /// Orthonormalizes the candidate functions on the element grid.
  static ElementBasis build(const ElementGrid& grid, Sampler candidates, double drop_tol = 1e-8) {
    ElementBasis b;
    b.candidates = std::move(candidates);
    const ElementField raw = sample_element(grid, b.candidates, Derivs::grad_laplacian);
    Orthonormalized ortho = orthonormalize(raw.interior.value, grid.weights, drop_tol);
    b.coeffs = std::move(ortho.coeffs);
    b.kept = std::move(ortho.kept);
    b.dropped = std::move(ortho.dropped);
    b.field = raw.combine(b.coeffs);
    b.gram = energy_inner(b.field.interior, b.field.interior, grid);
    b.gram = 0.5 * (b.gram + b.gram.transpose());
    b.gram_factor.compute(b.gram);
    if (b.gram_factor.info() != Eigen::Success)
      throw NumericalError("basis: energy Gram matrix is singular (dependent basis)");
    return b;
  }

  /// An already orthonormal basis given by its samples, e.g. read from disk.
  static ElementBasis from_field(const ElementGrid& grid, ElementField field, Sampler values) {
    if (!field.interior.has_grad_laplacian())
      throw std::invalid_argument("basis: stored samples must reach the gradient of the Laplacian");
    ElementBasis b;
    b.candidates = std::move(values);
    b.coeffs = Eigen::MatrixXd::Identity(field.interior.cols(), field.interior.cols());
    for (Eigen::Index i = 0; i < b.coeffs.cols(); ++i) b.kept.push_back(i);
    b.field = std::move(field);
    b.gram = energy_inner(b.field.interior, b.field.interior, grid);
    b.gram = 0.5 * (b.gram + b.gram.transpose());
    b.gram_factor.compute(b.gram);
    if (b.gram_factor.info() != Eigen::Success)
      throw NumericalError("basis: energy Gram matrix is singular (dependent basis)");
    return b;
  }

  /// Coefficients of Pi_N v for sampled v (values and gradients on this element).
  Eigen::MatrixXd project(const Samples& v, const ElementGrid& grid) const {
    return gram_factor.solve(energy_inner(field.interior, v, grid));
  }
};

/// The discontinuous space V_N = sum_k V_N(k) with global numbering.
struct BasisSet {
  std::vector<ElementBasis> elements;
  std::vector<Eigen::Index> offsets;

  Eigen::Index total() const {
    return elements.empty() ? 0 : offsets.back() + elements.back().size();
  }
  std::vector<Eigen::Index> sizes() const {
    std::vector<Eigen::Index> n;
    for (const auto& e : elements) n.push_back(e.size());
    return n;
  }
  void finalize() {
    offsets.assign(elements.size(), 0);
    for (std::size_t e = 1; e < elements.size(); ++e)
      offsets[e] = offsets[e - 1] + elements[e - 1].size();
  }

  /// The broken function sum_i coeffs(i, c) phi_i for each column c.
  GridFunction expand(const Eigen::MatrixXd& coeffs) const {
    if (coeffs.rows() != total())
      throw std::invalid_argument("basis: coefficient rows do not match the basis size");
    GridFunction g;
    g.elements.reserve(elements.size());
    for (std::size_t e = 0; e < elements.size(); ++e)
      g.elements.push_back(
          elements[e].field.combine(coeffs.middleRows(offsets[e], elements[e].size())));
    return g;
  }
};

/// Periodic box made of the element and all its neighbors.
inline Box extended_box(const Box& element) {
  Box ext = element;
  for (int j = 0; j < element.dim; ++j) {
    ext.lower[j] = element.lower[j] - element.width[j];
    ext.width[j] = 3.0 * element.width[j];
  }
  return ext;
}

struct AlbOptions {
  int functions = 6;            // N, eigenfunctions per extended element
  std::vector<int> wavecount;   // planewaves per dimension on the extended element
  double drop_tol = 1e-8;
};

/// Adaptive local basis: lowest eigenfunctions of the periodic problem on
/// each extended element, restricted to the element, constant prepended,
/// orthonormalized.
inline BasisSet generate_alb(const Partition& mesh, const QuadGrid& quad, const Potential& v,
                             const AlbOptions& opt) {
  if (opt.functions < 2)
    throw std::invalid_argument("ALB: at least 2 functions per element are required (got " +
                                std::to_string(opt.functions) + ")");
  for (int c : mesh.counts())
    if (c < 3) throw std::invalid_argument("ALB: extended elements need 3 elements per dimension");
  BasisSet basis;
  basis.elements.resize(mesh.size());
  parallel_for(mesh.size(), [&](std::size_t e) {
    const PlanewaveSolution pw =
        solve_planewave(v, extended_box(mesh.element(e).box), opt.wavecount, opt.functions);
    basis.elements[e] = ElementBasis::build(
        quad.element(e), concat_samplers(constant_sampler(mesh.dim()), pw.series.sampler()),
        opt.drop_tol);
  });
  basis.finalize();
  return basis;
}

/// Builds a basis from arbitrary candidate samplers, one per element.
inline BasisSet basis_from_samplers(const QuadGrid& quad, const std::vector<Sampler>& candidates,
                                    double drop_tol = 1e-8) {
  if (candidates.size() != quad.size())
    throw std::invalid_argument("basis: one candidate sampler per element required");
  BasisSet basis;
  basis.elements.resize(quad.size());
  parallel_for(quad.size(), [&](std::size_t e) {
    basis.elements[e] = ElementBasis::build(quad.element(e), candidates[e], drop_tol);
  });
  basis.finalize();
  return basis;
}

}  // namespace eigbound
