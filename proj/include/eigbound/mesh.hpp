#pragma once

// Periodic tensor-product partitions of a rectangular box, their face
// topology, and Legendre-Gauss-Lobatto quadrature grids on every element
// and element face.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

inline constexpr int kMaxDim = 3;

/// Axis-aligned box prod_j [lower_j, lower_j + width_j].
struct Box {
  int dim = 1;
  std::array<double, kMaxDim> lower{};
  std::array<double, kMaxDim> width{};

  double volume() const {
    double v = 1.0;
    for (int j = 0; j < dim; ++j) v *= width[j];
    return v;
  }
  /// Measure of a face orthogonal to `axis` (1 for the point faces of 1D boxes).
  double face_measure(int axis) const {
    double v = 1.0;
    for (int j = 0; j < dim; ++j)
      if (j != axis) v *= width[j];
    return v;
  }
};

/// Local face numbering on an element: 2 * axis + side, side 0 is the lower
/// end of the axis (outward normal -e_axis), side 1 the upper end.
inline constexpr int local_face(int axis, int side) { return 2 * axis + side; }
inline constexpr int face_axis(int local) { return local / 2; }
inline constexpr int face_side(int local) { return local % 2; }
inline constexpr double outward_sign(int local) { return face_side(local) == 0 ? -1.0 : 1.0; }
inline constexpr int opposite_face(int local) { return local ^ 1; }

struct Element {
  std::array<int, kMaxDim> index{};   // multi-index in the tensor grid
  Box box;
  std::array<std::size_t, 2 * kMaxDim> faces{};      // global face ids by local face
  std::array<std::size_t, 2 * kMaxDim> neighbors{};  // element across each local face
};

/// A face shared by two elements. `first` is the lower-indexed element and
/// `normal_sign * e_axis` is its outward unit normal on this face.
struct Face {
  std::size_t first = 0;
  std::size_t second = 0;
  int first_local = 0;
  int second_local = 0;
  int axis = 0;
  int normal_sign = 1;
  double measure = 0.0;

  std::array<double, kMaxDim> normal() const {
    std::array<double, kMaxDim> n{};
    n[axis] = normal_sign;
    return n;
  }
};

class Partition {
 public:
  static Partition build(int dim, std::vector<double> lengths, std::vector<int> counts) {
    if (dim < 1 || dim > kMaxDim)
      throw std::invalid_argument("partition dimension must be 1, 2 or 3 (got " +
                                  std::to_string(dim) + ")");
    if (static_cast<int>(lengths.size()) != dim || static_cast<int>(counts.size()) != dim)
      throw std::invalid_argument("partition: lengths and counts need one entry per dimension");
    for (int j = 0; j < dim; ++j) {
      if (!(lengths[j] > 0.0))
        throw std::invalid_argument("partition: domain lengths must be positive");
      if (counts[j] < 3)
        throw std::invalid_argument(
            "partition: at least 3 elements per dimension are required for distinct "
            "periodic neighbors (got " + std::to_string(counts[j]) + ")");
    }

    Partition p;
    p.dim_ = dim;
    p.lengths_ = std::move(lengths);
    p.counts_ = std::move(counts);

    std::size_t total = 1;
    for (int c : p.counts_) total *= static_cast<std::size_t>(c);
    p.elements_.resize(total);
    for (std::size_t e = 0; e < total; ++e) {
      Element& el = p.elements_[e];
      el.box.dim = dim;
      std::size_t rest = e;
      for (int j = 0; j < dim; ++j) {
        el.index[j] = static_cast<int>(rest % p.counts_[j]);
        rest /= p.counts_[j];
        const double h = p.lengths_[j] / p.counts_[j];
        el.box.width[j] = h;
        el.box.lower[j] = h * el.index[j];
      }
    }

    for (std::size_t e = 0; e < total; ++e) {
      for (int axis = 0; axis < dim; ++axis) {
        for (int side = 0; side < 2; ++side) {
          auto idx = p.elements_[e].index;
          const int step = side == 0 ? -1 : 1;
          idx[axis] = (idx[axis] + step + p.counts_[axis]) % p.counts_[axis];
          p.elements_[e].neighbors[local_face(axis, side)] = p.element_id(idx);
        }
      }
    }

    // Each face is created once, from the element on its lower-coordinate side.
    for (std::size_t e = 0; e < total; ++e) {
      for (int axis = 0; axis < dim; ++axis) {
        const int upper = local_face(axis, 1);
        const int lower = local_face(axis, 0);
        const std::size_t n = p.elements_[e].neighbors[upper];
        Face f;
        f.axis = axis;
        f.measure = p.elements_[e].box.face_measure(axis);
        if (e < n) {
          f.first = e;
          f.first_local = upper;
          f.second = n;
          f.second_local = lower;
          f.normal_sign = 1;
        } else {
          f.first = n;
          f.first_local = lower;
          f.second = e;
          f.second_local = upper;
          f.normal_sign = -1;
        }
        const std::size_t id = p.faces_.size();
        p.faces_.push_back(f);
        p.elements_[e].faces[upper] = id;
        p.elements_[n].faces[lower] = id;
      }
    }

    p.patches_.resize(total);
    for (std::size_t e = 0; e < total; ++e) {
      std::vector<std::size_t>& patch = p.patches_[e];
      patch.push_back(e);
      for (int lf = 0; lf < 2 * dim; ++lf) patch.push_back(p.elements_[e].neighbors[lf]);
      std::sort(patch.begin(), patch.end());
      patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
    }
    return p;
  }

  int dim() const { return dim_; }
  const std::vector<double>& lengths() const { return lengths_; }
  const std::vector<int>& counts() const { return counts_; }
  const std::vector<Element>& elements() const { return elements_; }
  const Element& element(std::size_t e) const { return elements_.at(e); }
  const std::vector<Face>& faces() const { return faces_; }
  const Face& face(std::size_t f) const { return faces_.at(f); }
  std::size_t size() const { return elements_.size(); }
  int faces_per_element() const { return 2 * dim_; }

  /// Patch omega(kappa): the element and every element sharing a face with it.
  const std::vector<std::size_t>& patch(std::size_t e) const { return patches_.at(e); }

  double domain_volume() const {
    double v = 1.0;
    for (double l : lengths_) v *= l;
    return v;
  }

  std::size_t element_id(const std::array<int, kMaxDim>& idx) const {
    std::size_t id = 0;
    std::size_t stride = 1;
    for (int j = 0; j < dim_; ++j) {
      id += stride * static_cast<std::size_t>(idx[j]);
      stride *= static_cast<std::size_t>(counts_[j]);
    }
    return id;
  }

 private:
  int dim_ = 1;
  std::vector<double> lengths_;
  std::vector<int> counts_;
  std::vector<Element> elements_;
  std::vector<Face> faces_;
  std::vector<std::vector<std::size_t>> patches_;
};

/// Legendre-Gauss-Lobatto rule on [-1, 1] with its collocation
/// differentiation matrix.
struct LobattoRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  Eigen::MatrixXd diff;  // (diff * f)(i) = f'(x_i) for polynomials of degree < n

  static LobattoRule make(int n) {
    if (n < 2) throw std::invalid_argument("Lobatto rule needs at least 2 nodes");
    const int deg = n - 1;
    LobattoRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = -std::cos(std::numbers::pi * i / deg);
    Eigen::VectorXd p_n(n);
    Eigen::VectorXd p_prev(n);
    // Newton iteration on (1 - x^2) P'_deg(x) via the Legendre recurrence.
    for (int iter = 0; iter < 100; ++iter) {
      Eigen::VectorXd p0 = Eigen::VectorXd::Ones(n);
      Eigen::VectorXd p1 = x;
      for (int k = 2; k <= deg; ++k) {
        Eigen::VectorXd p2 = ((2.0 * k - 1.0) * x.cwiseProduct(p1) - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      p_n = p1;
      p_prev = p0;
      const Eigen::VectorXd step =
          (x.cwiseProduct(p_n) - p_prev).cwiseQuotient(static_cast<double>(n) * p_n);
      x -= step;
      if (step.lpNorm<Eigen::Infinity>() < 1e-16) break;
    }
    {
      Eigen::VectorXd p0 = Eigen::VectorXd::Ones(n);
      Eigen::VectorXd p1 = x;
      for (int k = 2; k <= deg; ++k) {
        Eigen::VectorXd p2 = ((2.0 * k - 1.0) * x.cwiseProduct(p1) - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      p_n = p1;
    }
    x(0) = -1.0;
    x(n - 1) = 1.0;
    r.nodes = x;
    for (int i = 0; i < n; ++i) r.weights(i) = 2.0 / (deg * (deg + 1.0) * p_n(i) * p_n(i));

    // Barycentric weights give a well-conditioned differentiation matrix.
    Eigen::VectorXd bary = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) bary(i) /= (x(i) - x(j));
    r.diff = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      double diag = 0.0;
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        r.diff(i, j) = (bary(j) / bary(i)) / (x(i) - x(j));
        diag -= r.diff(i, j);
      }
      r.diff(i, i) = diag;
    }
    return r;
  }
};

/// Quadrature nodes of one element: tensor LGL nodes in the interior (axis 0
/// varies fastest) and tensor LGL nodes of the remaining axes on each face.
/// Barycentric Lagrange interpolation matrix from `nodes` to `targets`.
inline Eigen::MatrixXd lagrange_matrix(const Eigen::VectorXd& nodes, const Eigen::VectorXd& targets) {
  const Eigen::Index n = nodes.size();
  Eigen::VectorXd bary = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) bary(i) /= (nodes(i) - nodes(j));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(targets.size(), n);
  for (Eigen::Index k = 0; k < targets.size(); ++k) {
    Eigen::Index hit = -1;
    for (Eigen::Index i = 0; i < n; ++i)
      if (targets(k) == nodes(i)) hit = i;
    if (hit >= 0) {
      out(k, hit) = 1.0;
      continue;
    }
    double denom = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      out(k, i) = bary(i) / (targets(k) - nodes(i));
      denom += out(k, i);
    }
    out.row(k) /= denom;
  }
  return out;
}

struct ElementGrid {
  Eigen::MatrixXd points;  // nodes x dim
  Eigen::VectorXd weights;
  std::vector<Eigen::MatrixXd> face_points;  // by local face
  std::vector<Eigen::VectorXd> face_weights;
  std::vector<std::vector<Eigen::Index>> face_nodes;  // element node under each face node
};

class QuadGrid {
 public:
  static QuadGrid build(const Partition& mesh, int order) {
    if (order < 2)
      throw std::invalid_argument("quadrature order must be at least 2 (got " +
                                  std::to_string(order) + ")");
    QuadGrid q;
    q.order_ = order;
    q.dim_ = mesh.dim();
    q.rule_ = LobattoRule::make(order);
    const int d = mesh.dim();
    Eigen::Index n_elem = 1;
    for (int j = 0; j < d; ++j) n_elem *= order;
    const Eigen::Index n_face = n_elem / order;

    q.grids_.resize(mesh.size());
    for (std::size_t e = 0; e < mesh.size(); ++e) {
      const Box& box = mesh.element(e).box;
      ElementGrid& g = q.grids_[e];
      g.points.resize(n_elem, d);
      g.weights.resize(n_elem);
      for (Eigen::Index k = 0; k < n_elem; ++k) {
        Eigen::Index rest = k;
        double w = 1.0;
        for (int j = 0; j < d; ++j) {
          const Eigen::Index i = rest % order;
          rest /= order;
          const double half = 0.5 * box.width[j];
          g.points(k, j) = box.lower[j] + half * (q.rule_.nodes(i) + 1.0);
          w *= half * q.rule_.weights(i);
        }
        g.weights(k) = w;
      }
      g.face_points.resize(2 * d);
      g.face_weights.resize(2 * d);
      g.face_nodes.resize(2 * d);
      for (int lf = 0; lf < 2 * d; ++lf) {
        const int axis = face_axis(lf);
        const Eigen::Index fixed = face_side(lf) == 0 ? 0 : order - 1;
        g.face_points[lf].resize(n_face, d);
        g.face_weights[lf].resize(n_face);
        g.face_nodes[lf].resize(n_face);
        for (Eigen::Index k = 0; k < n_face; ++k) {
          Eigen::Index rest = k;
          Eigen::Index elem_node = 0;
          Eigen::Index stride = 1;
          double w = 1.0;
          for (int j = 0; j < d; ++j) {
            Eigen::Index i;
            if (j == axis) {
              i = fixed;
            } else {
              i = rest % order;
              rest /= order;
              w *= 0.5 * box.width[j] * q.rule_.weights(i);
            }
            elem_node += stride * i;
            stride *= order;
          }
          g.face_nodes[lf][k] = elem_node;
          g.face_points[lf].row(k) = g.points.row(elem_node);
          g.face_weights[lf](k) = w;
        }
      }
    }
    return q;
  }

  int order() const { return order_; }
  int dim() const { return dim_; }
  const LobattoRule& rule() const { return rule_; }
  const ElementGrid& element(std::size_t e) const { return grids_.at(e); }
  std::size_t size() const { return grids_.size(); }
  Eigen::Index nodes_per_element() const { return grids_.empty() ? 0 : grids_[0].weights.size(); }
  Eigen::Index nodes_per_face() const {
    return grids_.empty() ? 0 : grids_[0].face_weights[0].size();
  }

  /// Integral of f over the whole domain through the element rules.
  template <class F>
  double integrate(F&& f) const {
    double total = 0.0;
    for (const ElementGrid& g : grids_)
      for (Eigen::Index k = 0; k < g.weights.size(); ++k) total += g.weights(k) * f(g.points.row(k));
    return total;
  }

 private:
  int order_ = 0;
  int dim_ = 1;
  LobattoRule rule_;
  std::vector<ElementGrid> grids_;
};

}  // namespace eigbound
