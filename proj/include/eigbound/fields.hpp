#pragma once

// Functions of the broken space sampled on element quadrature grids, with
// analytically carried derivatives and one-sided face traces.

#include "eigbound/mesh.hpp"

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

/// Highest derivative carried by a sample set; each level includes the ones below.
enum class Derivs { value = 0, gradient = 1, laplacian = 2, grad_laplacian = 3 };

/// Point samples of one or more functions (one column per function).
struct Samples {
  Eigen::MatrixXd value;
  std::vector<Eigen::MatrixXd> gradient;        // one matrix per axis
  Eigen::MatrixXd laplacian;
  std::vector<Eigen::MatrixXd> grad_laplacian;  // one matrix per axis

  Eigen::Index points() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  bool has_gradient() const { return !gradient.empty(); }
  bool has_laplacian() const { return laplacian.cols() > 0; }
  bool has_grad_laplacian() const { return !grad_laplacian.empty(); }

  /// Samples of the functions value * coeffs (column j = sum_i coeffs(i, j) f_i).
  Samples combine(const Eigen::MatrixXd& coeffs) const {
    Samples out;
    out.value = value * coeffs;
    for (const auto& g : gradient) out.gradient.push_back(g * coeffs);
    if (has_laplacian()) out.laplacian = laplacian * coeffs;
    for (const auto& g : grad_laplacian) out.grad_laplacian.push_back(g * coeffs);
    return out;
  }

  Samples column(Eigen::Index j) const {
    Eigen::MatrixXd pick = Eigen::MatrixXd::Zero(cols(), 1);
    pick(j, 0) = 1.0;
    return combine(pick);
  }

  /// Columns of `other` appended after the columns of this set.
  Samples append(const Samples& other) const {
    auto cat = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
      Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
      out << a, b;
      return out;
    };
    Samples out;
    out.value = cat(value, other.value);
    if (has_gradient() && other.has_gradient())
      for (std::size_t j = 0; j < gradient.size(); ++j)
        out.gradient.push_back(cat(gradient[j], other.gradient[j]));
    if (has_laplacian() && other.has_laplacian())
      out.laplacian = cat(laplacian, other.laplacian);
    if (has_grad_laplacian() && other.has_grad_laplacian())
      for (std::size_t j = 0; j < grad_laplacian.size(); ++j)
        out.grad_laplacian.push_back(cat(grad_laplacian[j], other.grad_laplacian[j]));
    return out;
  }
};

/// Samples a * x + b * y; both sets must carry the same derivative levels.
inline Samples lincomb(double a, const Samples& x, double b, const Samples& y) {
  if (x.value.rows() != y.value.rows() || x.value.cols() != y.value.cols())
    throw std::invalid_argument("lincomb: sample shapes differ");
  Samples out;
  out.value = a * x.value + b * y.value;
  if (x.has_gradient() && y.has_gradient())
    for (std::size_t j = 0; j < x.gradient.size(); ++j)
      out.gradient.push_back(a * x.gradient[j] + b * y.gradient[j]);
  if (x.has_laplacian() && y.has_laplacian())
    out.laplacian = a * x.laplacian + b * y.laplacian;
  if (x.has_grad_laplacian() && y.has_grad_laplacian())
    for (std::size_t j = 0; j < x.grad_laplacian.size(); ++j)
      out.grad_laplacian.push_back(a * x.grad_laplacian[j] + b * y.grad_laplacian[j]);
  return out;
}

/// Evaluates functions at a batch of points (rows of the matrix).
using Sampler = std::function<Samples(const Eigen::MatrixXd& points, Derivs level)>;

/// Interior samples plus traces on each local face of one element.
struct ElementField {
  Samples interior;
  std::vector<Samples> faces;  // by local face; value and gradient only

  ElementField combine(const Eigen::MatrixXd& coeffs) const {
    ElementField out;
    out.interior = interior.combine(coeffs);
    for (const auto& f : faces) out.faces.push_back(f.combine(coeffs));
    return out;
  }
  ElementField append(const ElementField& other) const {
    ElementField out;
    out.interior = interior.append(other.interior);
    for (std::size_t lf = 0; lf < faces.size(); ++lf) out.faces.push_back(faces[lf].append(other.faces[lf]));
    return out;
  }
  Eigen::Index cols() const { return interior.cols(); }
};

/// Samples one element's interior nodes (up to `level`) and face nodes (value and gradient).
inline ElementField sample_element(const ElementGrid& grid, const Sampler& f, Derivs level) {
  ElementField out;
  out.interior = f(grid.points, level);
  const Derivs face_level = level == Derivs::value ? Derivs::value : Derivs::gradient;
  for (const auto& pts : grid.face_points) {
    Samples s = f(pts, face_level);
    s.laplacian.resize(0, 0);
    s.grad_laplacian.clear();
    out.faces.push_back(std::move(s));
  }
  return out;
}

/// A function of the broken space: one ElementField per element. Several
/// functions can share one GridFunction as columns.
struct GridFunction {
  std::vector<ElementField> elements;

  Eigen::Index cols() const { return elements.empty() ? 0 : elements.front().cols(); }

  static GridFunction sample(const QuadGrid& quad, const Sampler& f, Derivs level) {
    GridFunction g;
    g.elements.reserve(quad.size());
    for (std::size_t e = 0; e < quad.size(); ++e)
      g.elements.push_back(sample_element(quad.element(e), f, level));
    return g;
  }

  GridFunction column(Eigen::Index j) const {
    Eigen::MatrixXd pick = Eigen::MatrixXd::Zero(cols(), 1);
    pick(j, 0) = 1.0;
    return combine(pick);
  }
  GridFunction combine(const Eigen::MatrixXd& coeffs) const {
    GridFunction g;
    g.elements.reserve(elements.size());
    for (const auto& el : elements) g.elements.push_back(el.combine(coeffs));
    return g;
  }
};

inline GridFunction lincomb(double a, const GridFunction& x, double b, const GridFunction& y) {
  if (x.elements.size() != y.elements.size())
    throw std::invalid_argument("lincomb: element counts differ");
  GridFunction out;
  out.elements.resize(x.elements.size());
  for (std::size_t e = 0; e < x.elements.size(); ++e) {
    out.elements[e].interior = lincomb(a, x.elements[e].interior, b, y.elements[e].interior);
    for (std::size_t lf = 0; lf < x.elements[e].faces.size(); ++lf)
      out.elements[e].faces.push_back(
          lincomb(a, x.elements[e].faces[lf], b, y.elements[e].faces[lf]));
  }
  return out;
}

namespace detail {
inline void require_traces(const GridFunction& f, std::size_t e, int lf, bool gradient) {
  if (e >= f.elements.size() || static_cast<std::size_t>(lf) >= f.elements[e].faces.size())
    throw std::invalid_argument("missing face trace data on element " + std::to_string(e));
  if (gradient && !f.elements[e].faces[lf].has_gradient())
    throw std::invalid_argument("missing gradient trace data on element " + std::to_string(e));
}
}  // namespace detail

/// Scalar jump seen from element e across local face lf: the component of
/// [[v]] along the outward normal of e, i.e. v|_e - v|_neighbor.
inline Eigen::VectorXd jump_from(const GridFunction& f, const Partition& mesh, std::size_t e, int lf,
                                 Eigen::Index col = 0) {
  const std::size_t n = mesh.element(e).neighbors[lf];
  detail::require_traces(f, e, lf, false);
  detail::require_traces(f, n, opposite_face(lf), false);
  return f.elements[e].faces[lf].value.col(col) - f.elements[n].faces[opposite_face(lf)].value.col(col);
}

/// [[grad v]] on the face under local face lf of element e.
inline Eigen::VectorXd normal_gradient_jump_from(const GridFunction& f, const Partition& mesh,
                                                 std::size_t e, int lf, Eigen::Index col = 0) {
  const std::size_t n = mesh.element(e).neighbors[lf];
  const int axis = face_axis(lf);
  detail::require_traces(f, e, lf, true);
  detail::require_traces(f, n, opposite_face(lf), true);
  return outward_sign(lf) * (f.elements[e].faces[lf].gradient[axis].col(col) -
                             f.elements[n].faces[opposite_face(lf)].gradient[axis].col(col));
}

/// [[v]] = v|_k n_k + v|_k' n_k' on a face, as face-nodes x dim.
inline Eigen::MatrixXd jump_value(const GridFunction& f, const Partition& mesh, std::size_t face,
                                  Eigen::Index col = 0) {
  const Face& fc = mesh.face(face);
  const Eigen::VectorXd s = jump_from(f, mesh, fc.first, fc.first_local, col);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.size(), mesh.dim());
  out.col(fc.axis) = outward_sign(fc.first_local) * s;
  return out;
}

/// {v} = (v|_k + v|_k') / 2 on a face.
inline Eigen::VectorXd avg_value(const GridFunction& f, const Partition& mesh, std::size_t face,
                                 Eigen::Index col = 0) {
  const Face& fc = mesh.face(face);
  detail::require_traces(f, fc.first, fc.first_local, false);
  detail::require_traces(f, fc.second, fc.second_local, false);
  return 0.5 * (f.elements[fc.first].faces[fc.first_local].value.col(col) +
                f.elements[fc.second].faces[fc.second_local].value.col(col));
}

/// [[grad v]] = grad v|_k . n_k + grad v|_k' . n_k' on a face.
inline Eigen::VectorXd jump_normal_gradient(const GridFunction& f, const Partition& mesh,
                                            std::size_t face, Eigen::Index col = 0) {
  const Face& fc = mesh.face(face);
  return normal_gradient_jump_from(f, mesh, fc.first, fc.first_local, col);
}

/// {grad v} on a face, as face-nodes x dim.
inline Eigen::MatrixXd avg_gradient(const GridFunction& f, const Partition& mesh, std::size_t face,
                                    Eigen::Index col = 0) {
  const Face& fc = mesh.face(face);
  detail::require_traces(f, fc.first, fc.first_local, true);
  detail::require_traces(f, fc.second, fc.second_local, true);
  Eigen::MatrixXd out(f.elements[fc.first].faces[fc.first_local].points(), mesh.dim());
  for (int j = 0; j < mesh.dim(); ++j)
    out.col(j) = 0.5 * (f.elements[fc.first].faces[fc.first_local].gradient[j].col(col) +
                        f.elements[fc.second].faces[fc.second_local].gradient[j].col(col));
  return out;
}

inline double inner_elem(const GridFunction& f, const GridFunction& g, const QuadGrid& quad,
                         std::size_t e, Eigen::Index cf = 0, Eigen::Index cg = 0) {
  const auto& a = f.elements.at(e).interior.value;
  const auto& b = g.elements.at(e).interior.value;
  const auto& w = quad.element(e).weights;
  if (a.rows() != w.size() || b.rows() != w.size())
    throw std::invalid_argument("inner_elem: samples do not match the quadrature grid");
  return (a.col(cf).array() * b.col(cg).array() * w.array()).sum();
}

inline double l2_norm_elem(const GridFunction& f, const QuadGrid& quad, std::size_t e,
                           Eigen::Index col = 0) {
  return std::sqrt(std::max(0.0, inner_elem(f, f, quad, e, col, col)));
}

/// L2 norm of the traces of f from inside element e over its whole boundary.
inline double l2_norm_face(const GridFunction& f, const QuadGrid& quad, std::size_t e,
                           Eigen::Index col = 0) {
  const ElementGrid& g = quad.element(e);
  double sum = 0.0;
  for (std::size_t lf = 0; lf < g.face_weights.size(); ++lf) {
    const auto& v = f.elements.at(e).faces.at(lf).value;
    if (v.rows() != g.face_weights[lf].size())
      throw std::invalid_argument("l2_norm_face: traces do not match the face grid");
    sum += (v.col(col).array().square() * g.face_weights[lf].array()).sum();
  }
  return std::sqrt(sum);
}

/// L2 norm over all of Omega.
inline double l2_norm(const GridFunction& f, const QuadGrid& quad, Eigen::Index col = 0) {
  double sum = 0.0;
  for (std::size_t e = 0; e < quad.size(); ++e) sum += inner_elem(f, f, quad, e, col, col);
  return std::sqrt(std::max(0.0, sum));
}

/// Both sides of the piecewise integration-by-parts identity
///   sum_k (lap v, w)_k + (grad v, grad w)_k
///     = 1/2 sum_k ([[grad v]], w)_dk + (grad v, [[w]])_dk.
struct IntegrationByParts {
  double volume = 0.0;
  double boundary = 0.0;
  double residual() const { return std::abs(volume - boundary); }
  double scale() const { return std::max({std::abs(volume), std::abs(boundary), 1.0}); }
};

inline IntegrationByParts integration_by_parts_sides(const GridFunction& v, const GridFunction& w,
                                                     const Partition& mesh, const QuadGrid& quad,
                                                     Eigen::Index cv = 0, Eigen::Index cw = 0) {
  IntegrationByParts out;
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const Samples& vi = v.elements.at(e).interior;
    const Samples& wi = w.elements.at(e).interior;
    if (!vi.has_gradient() || !vi.has_laplacian() || !wi.has_gradient())
      throw std::invalid_argument("integration by parts needs gradients and the Laplacian of v");
    const auto& wt = quad.element(e).weights;
    double vol = (vi.laplacian.col(cv).array() * wi.value.col(cw).array() * wt.array()).sum();
    for (int j = 0; j < mesh.dim(); ++j)
      vol += (vi.gradient[j].col(cv).array() * wi.gradient[j].col(cw).array() * wt.array()).sum();
    out.volume += vol;
    for (int lf = 0; lf < mesh.faces_per_element(); ++lf) {
      const auto& fw = quad.element(e).face_weights[lf];
      const Eigen::VectorXd jg = normal_gradient_jump_from(v, mesh, e, lf, cv);
      const Eigen::VectorXd jw = jump_from(w, mesh, e, lf, cw);
      const Eigen::VectorXd dn =
          outward_sign(lf) * v.elements[e].faces[lf].gradient[face_axis(lf)].col(cv);
      const auto& wtrace = w.elements[e].faces[lf].value.col(cw);
      out.boundary += 0.5 * ((jg.array() * wtrace.array() + dn.array() * jw.array()) * fw.array()).sum();
    }
  }
  return out;
}

/// Absolute residual of the piecewise integration-by-parts identity.
inline double check_integration_by_parts(const GridFunction& v, const GridFunction& w,
                                         const Partition& mesh, const QuadGrid& quad,
                                         Eigen::Index cv = 0, Eigen::Index cw = 0) {
  return integration_by_parts_sides(v, w, mesh, quad, cv, cw).residual();
}

}  // namespace eigbound
