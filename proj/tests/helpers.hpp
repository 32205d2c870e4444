#pragma once

#include "eigbound/fields.hpp"
#include "eigbound/mesh.hpp"

#include <functional>

namespace eigbound::testing {

using Scalar = std::function<double(const Eigen::RowVectorXd&)>;
using Vector = std::function<Eigen::RowVectorXd(const Eigen::RowVectorXd&)>;

/// One function from closed forms of its value, gradient and Laplacian.
inline Sampler analytic(Scalar f, Vector grad = {}, Scalar lap = {}, Vector grad_lap = {}) {
  return [=](const Eigen::MatrixXd& pts, Derivs level) {
    const Eigen::Index n = pts.rows();
    const int d = static_cast<int>(pts.cols());
    const int lvl = static_cast<int>(level);
    Samples s;
    s.value.resize(n, 1);
    for (Eigen::Index p = 0; p < n; ++p) s.value(p, 0) = f(pts.row(p));
    if (lvl >= 1) {
      s.gradient.assign(d, Eigen::MatrixXd(n, 1));
      for (Eigen::Index p = 0; p < n; ++p) {
        const Eigen::RowVectorXd g = grad(pts.row(p));
        for (int j = 0; j < d; ++j) s.gradient[j](p, 0) = g(j);
      }
    }
    if (lvl >= 2) {
      s.laplacian.resize(n, 1);
      for (Eigen::Index p = 0; p < n; ++p) s.laplacian(p, 0) = lap(pts.row(p));
    }
    if (lvl >= 3) {
      s.grad_laplacian.assign(d, Eigen::MatrixXd(n, 1));
      for (Eigen::Index p = 0; p < n; ++p) {
        const Eigen::RowVectorXd g = grad_lap(pts.row(p));
        for (int j = 0; j < d; ++j) s.grad_laplacian[j](p, 0) = g(j);
      }
    }
    return s;
  };
}

/// A broken function given element by element.
inline GridFunction sample_broken(const QuadGrid& quad, const std::function<Sampler(std::size_t)>& per_element,
                                  Derivs level) {
  GridFunction g;
  for (std::size_t e = 0; e < quad.size(); ++e)
    g.elements.push_back(sample_element(quad.element(e), per_element(e), level));
  return g;
}

inline Sampler sine_1d(double k) {
  return analytic([k](const auto& x) { return std::sin(k * x(0)); },
                  [k](const auto& x) { return Eigen::RowVectorXd::Constant(1, k * std::cos(k * x(0))); },
                  [k](const auto& x) { return -k * k * std::sin(k * x(0)); },
                  [k](const auto& x) { return Eigen::RowVectorXd::Constant(1, -k * k * k * std::cos(k * x(0))); });
}

inline Sampler constant_one() {
  return analytic([](const auto&) { return 1.0; },
                  [](const auto& x) { return Eigen::RowVectorXd::Zero(x.size()); },
                  [](const auto&) { return 0.0; },
                  [](const auto& x) { return Eigen::RowVectorXd::Zero(x.size()); });
}

}  // namespace eigbound::testing
