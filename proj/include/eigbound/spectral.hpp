#pragma once

// Planewave discretization of -Laplace + V on periodic boxes. Used both for
// the global reference eigenpairs and for the extended-element problems that
// generate adaptive local basis functions.

#include "eigbound/fields.hpp"
#include "eigbound/linalg.hpp"
#include "eigbound/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

struct Gaussian {
  std::vector<double> center;
  double width = 1.0;
  double magnitude = 0.0;
};

/// Sum of periodically imaged Gaussian bumps plus a constant offset.
struct PotentialSpec {
  int dim = 1;
  std::vector<double> lengths;
  std::vector<Gaussian> bumps;
  double offset = 0.0;
  int image_radius = 2;

  void validate() const {
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("potential: dimension must be 1..3");
    if (static_cast<int>(lengths.size()) != dim)
      throw std::invalid_argument("potential: one period length per dimension required");
    for (double l : lengths)
      if (!(l > 0.0)) throw std::invalid_argument("potential: period lengths must be positive");
    if (image_radius < 0) throw std::invalid_argument("potential: image radius must be >= 0");
    for (const Gaussian& g : bumps) {
      if (!(g.width > 0.0)) throw std::invalid_argument("potential: Gaussian widths must be positive");
      if (static_cast<int>(g.center.size()) != dim)
        throw std::invalid_argument("potential: Gaussian center has the wrong dimension");
    }
  }
};

class Potential {
 public:
  explicit Potential(PotentialSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  const PotentialSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim; }

  /// Value and (for level >= gradient) gradient at each row of `points`.
  Samples sample(const Eigen::MatrixXd& points, Derivs level = Derivs::gradient) const {
    const int d = spec_.dim;
    if (points.cols() != d) throw std::invalid_argument("potential: point dimension mismatch");
    const Eigen::Index np = points.rows();
    const bool grad = level != Derivs::value;
    Samples s;
    s.value = Eigen::MatrixXd::Constant(np, 1, spec_.offset);
    if (grad) s.gradient.assign(d, Eigen::MatrixXd::Zero(np, 1));

    const int r = spec_.image_radius;
    const int span = 2 * r + 1;
    int images = 1;
    for (int j = 0; j < d; ++j) images *= span;

    for (Eigen::Index p = 0; p < np; ++p) {
      std::array<double, kMaxDim> x{};
      for (int j = 0; j < d; ++j) {
        const double l = spec_.lengths[j];
        x[j] = points(p, j) - l * std::floor(points(p, j) / l);
      }
      for (const Gaussian& g : spec_.bumps) {
        const double inv = 1.0 / (g.width * g.width);
        for (int im = 0; im < images; ++im) {
          int rest = im;
          std::array<double, kMaxDim> diff{};
          double r2 = 0.0;
          for (int j = 0; j < d; ++j) {
            const int shift = rest % span - r;
            rest /= span;
            diff[j] = x[j] - g.center[j] - shift * spec_.lengths[j];
            r2 += diff[j] * diff[j];
          }
          const double val = g.magnitude * std::exp(-0.5 * r2 * inv);
          s.value(p, 0) += val;
          if (grad)
            for (int j = 0; j < d; ++j) s.gradient[j](p, 0) -= val * diff[j] * inv;
        }
      }
    }
    return s;
  }

  double operator()(const Eigen::VectorXd& x) const {
    return sample(x.transpose(), Derivs::value).value(0, 0);
  }

 private:
  PotentialSpec spec_;
};

/// Potential values at arbitrary points.
inline Eigen::VectorXd sample_potential(const PotentialSpec& spec, const Eigen::MatrixXd& points) {
  return Potential(spec).sample(points, Derivs::value).value.col(0);
}

/// The potential (value and gradient) on every element quadrature grid, plus
/// its minimum V_m over all nodes.
struct GridPotential {
  std::vector<Eigen::VectorXd> value;
  std::vector<Eigen::MatrixXd> gradient;  // nodes x dim
  double minimum = 0.0;

  static GridPotential sample(const Potential& v, const QuadGrid& quad) {
    GridPotential g;
    g.minimum = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < quad.size(); ++e) {
      const Samples s = v.sample(quad.element(e).points, Derivs::gradient);
      g.value.push_back(s.value.col(0));
      Eigen::MatrixXd grad(s.points(), v.dim());
      for (int j = 0; j < v.dim(); ++j) grad.col(j) = s.gradient[j].col(0);
      g.gradient.push_back(std::move(grad));
      g.minimum = std::min(g.minimum, g.value.back().minCoeff());
    }
    return g;
  }
};

/// Real trigonometric polynomials on a periodic box, stored by complex
/// coefficients of exp(i k.(x - origin)) over a symmetric frequency set.
class FourierSeries {
 public:
  FourierSeries() = default;
  FourierSeries(Box box, std::array<int, kMaxDim> max_freq, Eigen::MatrixXcd coeffs)
      : box_(box), max_freq_(max_freq), coeffs_(std::move(coeffs)) {
    if (coeffs_.rows() != mode_count())
      throw std::invalid_argument("Fourier series: coefficient rows do not match the mode set");
  }

  const Box& box() const { return box_; }
  int dim() const { return box_.dim; }
  const std::array<int, kMaxDim>& max_freq() const { return max_freq_; }
  const Eigen::MatrixXcd& coeffs() const { return coeffs_; }
  Eigen::Index functions() const { return coeffs_.cols(); }

  static Eigen::Index count_modes(int dim, const std::array<int, kMaxDim>& max_freq) {
    Eigen::Index n = 1;
    for (int j = 0; j < dim && j < kMaxDim; ++j) n *= 2 * max_freq[j] + 1;
    return n;
  }
  Eigen::Index mode_count() const { return count_modes(box_.dim, max_freq_); }
  /// Integer frequency vector of a mode (axis 0 varies fastest).
  std::array<int, kMaxDim> mode(Eigen::Index idx) const {
    std::array<int, kMaxDim> n{};
    for (int j = 0; j < box_.dim; ++j) {
      const int span = 2 * max_freq_[j] + 1;
      n[j] = static_cast<int>(idx % span) - max_freq_[j];
      idx /= span;
    }
    return n;
  }
  double wavenumber(int n, int axis) const {
    return 2.0 * std::numbers::pi * n / box_.width[axis];
  }

  /// Exact evaluation of the series (and of derivatives up to `level`).
  Samples evaluate(const Eigen::MatrixXd& points, Derivs level) const {
    const int d = box_.dim;
    if (points.cols() != d) throw std::invalid_argument("Fourier series: point dimension mismatch");
    const Eigen::Index np = points.rows();
    const Eigen::Index nm = mode_count();
    const Eigen::Index m = functions();
    const int lvl = static_cast<int>(level);

    // Per-axis frequency tables and the coefficient blocks for each derivative.
    Eigen::MatrixXd k(nm, d);
    for (Eigen::Index i = 0; i < nm; ++i) {
      const auto n = mode(i);
      for (int j = 0; j < d; ++j) k(i, j) = wavenumber(n[j], j);
    }
    const Eigen::VectorXd k2 = k.rowwise().squaredNorm();
    const std::complex<double> I(0.0, 1.0);

    std::vector<Eigen::MatrixXcd> blocks;
    blocks.push_back(coeffs_);
    if (lvl >= 1)
      for (int j = 0; j < d; ++j) blocks.push_back((I * k.col(j)).asDiagonal() * coeffs_);
    if (lvl >= 2) blocks.push_back((-k2.cast<std::complex<double>>()).asDiagonal() * coeffs_);
    if (lvl >= 3)
      for (int j = 0; j < d; ++j)
        blocks.push_back((-I * k.col(j).cwiseProduct(k2)).asDiagonal() * coeffs_);
    Eigen::MatrixXcd all(nm, m * static_cast<Eigen::Index>(blocks.size()));
    for (std::size_t b = 0; b < blocks.size(); ++b) all.middleCols(m * b, m) = blocks[b];

    Eigen::MatrixXcd phase(np, nm);
    std::vector<Eigen::MatrixXcd> axis_phase(d);
    for (int j = 0; j < d; ++j) {
      const int span = 2 * max_freq_[j] + 1;
      axis_phase[j].resize(np, span);
      for (Eigen::Index p = 0; p < np; ++p) {
        const double t = 2.0 * std::numbers::pi * (points(p, j) - box_.lower[j]) / box_.width[j];
        for (int n = -max_freq_[j]; n <= max_freq_[j]; ++n)
          axis_phase[j](p, n + max_freq_[j]) = std::polar(1.0, n * t);
      }
    }
    for (Eigen::Index i = 0; i < nm; ++i) {
      Eigen::Index rest = i;
      const int span0 = 2 * max_freq_[0] + 1;
      phase.col(i) = axis_phase[0].col(rest % span0);
      rest /= span0;
      for (int j = 1; j < d; ++j) {
        const int span = 2 * max_freq_[j] + 1;
        phase.col(i) = phase.col(i).cwiseProduct(axis_phase[j].col(rest % span));
        rest /= span;
      }
    }
    const Eigen::MatrixXd out = (phase * all).real();

    Samples s;
    Eigen::Index b = 0;
    s.value = out.middleCols(m * b++, m);
    if (lvl >= 1)
      for (int j = 0; j < d; ++j) s.gradient.push_back(out.middleCols(m * b++, m));
    if (lvl >= 2) s.laplacian = out.middleCols(m * b++, m);
    if (lvl >= 3)
      for (int j = 0; j < d; ++j) s.grad_laplacian.push_back(out.middleCols(m * b++, m));
    return s;
  }

  Sampler sampler() const {
    return [series = *this](const Eigen::MatrixXd& pts, Derivs level) {
      return series.evaluate(pts, level);
    };
  }

 private:
  Box box_;
  std::array<int, kMaxDim> max_freq_{};
  Eigen::MatrixXcd coeffs_;
};

/// Trigonometric-exact evaluation of a series and its derivatives at points.
inline Samples fourier_interpolate(const FourierSeries& series, const Eigen::MatrixXd& points,
                                   Derivs level = Derivs::value) {
  return series.evaluate(points, level);
}

struct PlanewaveSolution {
  Eigen::VectorXd eigenvalues;
  FourierSeries series;  // L2(box)-orthonormal eigenfunctions as columns
};

namespace detail {

/// Mean of V(x) exp(-i k_q.(x - origin)) over the box for q in [-2K, 2K]^d,
/// from samples on a uniform grid.
class PotentialSpectrum {
 public:
  PotentialSpectrum(const Potential& v, const Box& box, const std::array<int, kMaxDim>& max_freq)
      : dim_(box.dim) {
    std::array<int, kMaxDim> grid{};
    Eigen::Index total = 1;
    for (int j = 0; j < dim_; ++j) {
      reach_[j] = 2 * max_freq[j];
      grid[j] = 2 * (4 * max_freq[j] + 2);
      total *= grid[j];
    }
    Eigen::MatrixXd pts(total, dim_);
    for (Eigen::Index p = 0; p < total; ++p) {
      Eigen::Index rest = p;
      for (int j = 0; j < dim_; ++j) {
        pts(p, j) = box.lower[j] + box.width[j] * static_cast<double>(rest % grid[j]) / grid[j];
        rest /= grid[j];
      }
    }
    std::vector<std::complex<double>> data(total);
    const Eigen::VectorXd vals = v.sample(pts, Derivs::value).value.col(0);
    for (Eigen::Index p = 0; p < total; ++p) data[p] = vals(p);

    // Separable DFT, one axis at a time; the axis length changes from grid to 2*reach+1.
    std::array<Eigen::Index, kMaxDim> shape{};
    for (int j = 0; j < dim_; ++j) shape[j] = grid[j];
    for (int axis = 0; axis < dim_; ++axis) {
      const Eigen::Index in_len = grid[axis];
      const Eigen::Index out_len = 2 * reach_[axis] + 1;
      Eigen::MatrixXcd dft(out_len, in_len);
      for (Eigen::Index q = 0; q < out_len; ++q)
        for (Eigen::Index x = 0; x < in_len; ++x)
          dft(q, x) = std::polar(1.0 / in_len, -2.0 * std::numbers::pi *
                                                   static_cast<double>((q - reach_[axis]) * x) /
                                                   static_cast<double>(in_len));
      Eigen::Index before = 1;
      for (int j = 0; j < axis; ++j) before *= shape[j];
      Eigen::Index after = 1;
      for (int j = axis + 1; j < dim_; ++j) after *= shape[j];
      std::vector<std::complex<double>> next(before * out_len * after);
      Eigen::VectorXcd line(in_len);
      for (Eigen::Index a = 0; a < after; ++a) {
        for (Eigen::Index b = 0; b < before; ++b) {
          for (Eigen::Index x = 0; x < in_len; ++x) line(x) = data[b + before * (x + in_len * a)];
          const Eigen::VectorXcd res = dft * line;
          for (Eigen::Index q = 0; q < out_len; ++q) next[b + before * (q + out_len * a)] = res(q);
        }
      }
      data.swap(next);
      shape[axis] = out_len;
    }
    table_ = std::move(data);
  }

  std::complex<double> operator()(const std::array<int, kMaxDim>& q) const {
    Eigen::Index idx = 0;
    Eigen::Index stride = 1;
    for (int j = 0; j < dim_; ++j) {
      idx += stride * (q[j] + reach_[j]);
      stride *= 2 * reach_[j] + 1;
    }
    return table_[idx];
  }

 private:
  int dim_;
  std::array<int, kMaxDim> reach_{};
  std::vector<std::complex<double>> table_;
};

}  // namespace detail

/// The m lowest eigenpairs of -Laplace + V on the periodic box, using
/// `wavecount[j]` (odd) planewaves along axis j.
inline PlanewaveSolution solve_planewave(const Potential& v, const Box& box,
                                         const std::vector<int>& wavecount, Eigen::Index m) {
  const int d = box.dim;
  if (v.dim() != d) throw std::invalid_argument("planewave: potential/box dimension mismatch");
  if (static_cast<int>(wavecount.size()) != d)
    throw std::invalid_argument("planewave: one wavecount per dimension required");
  std::array<int, kMaxDim> kmax{};
  for (int j = 0; j < d; ++j) {
    if (wavecount[j] < 1 || wavecount[j] % 2 == 0)
      throw std::invalid_argument("planewave: wavecount must be odd and positive (got " +
                                  std::to_string(wavecount[j]) + ")");
    kmax[j] = wavecount[j] / 2;
  }
  if (m < 1) throw std::invalid_argument("planewave: at least one eigenpair must be requested");

  const FourierSeries modes(box, kmax,
                           Eigen::MatrixXcd::Zero(FourierSeries::count_modes(d, kmax), 0));
  const Eigen::Index total = modes.mode_count();
  if (m > total)
    throw std::invalid_argument("planewave: requested " + std::to_string(m) +
                                " eigenpairs from a basis of " + std::to_string(total));

  // Real basis: the constant, then cos(k.x) and sin(k.x) for each frequency
  // whose last nonzero component is positive; all L2-normalized.
  enum class Kind { constant, cosine, sine };
  struct RealMode {
    Kind kind;
    std::array<int, kMaxDim> n;
    Eigen::Index complex_index;
    Eigen::Index mirror_index;
  };
  std::vector<RealMode> basis;
  const Eigen::Index centre = (total - 1) / 2;
  for (Eigen::Index i = 0; i < total; ++i) {
    const auto n = modes.mode(i);
    int last = 0;
    for (int j = d - 1; j >= 0; --j)
      if (n[j] != 0) {
        last = n[j];
        break;
      }
    if (last == 0) {
      basis.push_back({Kind::constant, n, i, i});
    } else if (last > 0) {
      basis.push_back({Kind::cosine, n, i, 2 * centre - i});
      basis.push_back({Kind::sine, n, i, 2 * centre - i});
    }
  }

  const detail::PotentialSpectrum vhat(v, box, kmax);
  auto add = [d](const std::array<int, kMaxDim>& a, const std::array<int, kMaxDim>& b, int sign) {
    std::array<int, kMaxDim> out{};
    for (int j = 0; j < d; ++j) out[j] = a[j] + sign * b[j];
    return out;
  };
  auto re = [&](const std::array<int, kMaxDim>& q) { return vhat(q).real(); };
  auto im = [&](const std::array<int, kMaxDim>& q) { return -vhat(q).imag(); };
  const double r2 = std::sqrt(2.0);

  const Eigen::Index size = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd h(size, size);
  for (Eigen::Index a = 0; a < size; ++a) {
    const RealMode& p = basis[a];
    for (Eigen::Index b = 0; b <= a; ++b) {
      const RealMode& q = basis[b];
      double val = 0.0;
      if (p.kind == Kind::constant && q.kind == Kind::constant) {
        val = re(p.n);
      } else if (p.kind == Kind::constant || q.kind == Kind::constant) {
        const RealMode& t = p.kind == Kind::constant ? q : p;
        val = r2 * (t.kind == Kind::cosine ? re(t.n) : im(t.n));
      } else {
        const auto diff = add(p.n, q.n, -1);
        const auto sum = add(p.n, q.n, 1);
        if (p.kind == Kind::cosine && q.kind == Kind::cosine) {
          val = re(diff) + re(sum);
        } else if (p.kind == Kind::sine && q.kind == Kind::sine) {
          val = re(diff) - re(sum);
        } else if (p.kind == Kind::cosine) {
          val = im(sum) - im(diff);
        } else {
          val = im(sum) + im(diff);
        }
      }
      h(a, b) = val;
      h(b, a) = val;
    }
    if (p.kind != Kind::constant) {
      double k2 = 0.0;
      for (int j = 0; j < d; ++j) k2 += std::pow(modes.wavenumber(p.n[j], j), 2);
      h(a, a) += k2;
    }
  }

  const linalg::SymmetricEigen eig = linalg::lowest_eigenpairs(std::move(h), m);

  // Back to complex coefficients of exp(i k.(x - origin)).
  const double scale = 1.0 / std::sqrt(box.volume());
  const std::complex<double> I(0.0, 1.0);
  Eigen::MatrixXcd coeffs = Eigen::MatrixXcd::Zero(total, m);
  for (Eigen::Index a = 0; a < size; ++a) {
    const RealMode& p = basis[a];
    for (Eigen::Index c = 0; c < m; ++c) {
      const double x = eig.vectors(a, c);
      switch (p.kind) {
        case Kind::constant:
          coeffs(p.complex_index, c) += scale * x;
          break;
        case Kind::cosine:
          coeffs(p.complex_index, c) += scale * x / r2;
          coeffs(p.mirror_index, c) += scale * x / r2;
          break;
        case Kind::sine:
          coeffs(p.complex_index, c) += -I * scale * x / r2;
          coeffs(p.mirror_index, c) += I * scale * x / r2;
          break;
      }
    }
  }
  return {eig.values, FourierSeries(box, kmax, std::move(coeffs))};
}

/// Reference eigenpairs of the periodic problem on the whole domain, sampled
/// on the quadrature grid.
struct ReferenceSolution {
  Eigen::VectorXd eigenvalues;
  FourierSeries series;
  GridFunction fields;  // one column per eigenfunction, up to the Laplacian
};

inline ReferenceSolution solve_reference(const Potential& v, const Partition& mesh,
                                         const QuadGrid& quad, const std::vector<int>& wavecount,
                                         Eigen::Index m, Derivs level = Derivs::laplacian) {
  Box domain;
  domain.dim = mesh.dim();
  for (int j = 0; j < mesh.dim(); ++j) domain.width[j] = mesh.lengths()[j];
  PlanewaveSolution pw = solve_planewave(v, domain, wavecount, m);
  ReferenceSolution out;
  out.eigenvalues = std::move(pw.eigenvalues);
  out.fields = GridFunction::sample(quad, pw.series.sampler(), level);
  out.series = std::move(pw.series);
  return out;
}

}  // namespace eigbound
