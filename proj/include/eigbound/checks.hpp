#pragma once

// Property checks on a configured discretization: coercivity, projections,
// local constants, alignment, the spectral oracle and integration by parts.

#include "eigbound/pipeline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace eigbound {

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;      // worst observed quantity
  double tolerance = 0.0;  // pass threshold for `value`
  std::string detail;
};

inline Check make_check(std::string name, double value, double tolerance, std::string detail = {}) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.tolerance = tolerance;
  c.passed = std::isfinite(value) && value <= tolerance;
  c.detail = std::move(detail);
  return c;
}

/// Random periodic trigonometric polynomials on the domain, `count` columns,
/// carrying derivatives up to the gradient of the Laplacian.
inline Sampler random_trig_sampler(int dim, const std::vector<double>& lengths, int count,
                                   int max_freq, std::mt19937_64& rng) {
  struct Mode {
    std::array<double, kMaxDim> k{};
    double cos_amp = 0.0, sin_amp = 0.0;
  };
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> freq(-max_freq, max_freq);
  std::vector<std::vector<Mode>> columns(count);
  for (auto& modes : columns) {
    for (int m = 0; m < 6; ++m) {
      Mode md;
      for (int j = 0; j < dim; ++j) md.k[j] = 2.0 * std::numbers::pi * freq(rng) / lengths[j];
      md.cos_amp = normal(rng);
      md.sin_amp = normal(rng);
      modes.push_back(md);
    }
  }
  return [dim, columns](const Eigen::MatrixXd& pts, Derivs level) {
    const Eigen::Index n = pts.rows();
    const Eigen::Index c = static_cast<Eigen::Index>(columns.size());
    const int lvl = static_cast<int>(level);
    Samples s;
    s.value = Eigen::MatrixXd::Zero(n, c);
    if (lvl >= 1) s.gradient.assign(dim, Eigen::MatrixXd::Zero(n, c));
    if (lvl >= 2) s.laplacian = Eigen::MatrixXd::Zero(n, c);
    if (lvl >= 3) s.grad_laplacian.assign(dim, Eigen::MatrixXd::Zero(n, c));
    for (Eigen::Index col = 0; col < c; ++col)
      for (const auto& md : columns[col]) {
        double k2 = 0.0;
        for (int j = 0; j < dim; ++j) k2 += md.k[j] * md.k[j];
        for (Eigen::Index p = 0; p < n; ++p) {
          double phase = 0.0;
          for (int j = 0; j < dim; ++j) phase += md.k[j] * pts(p, j);
          const double f = md.cos_amp * std::cos(phase) + md.sin_amp * std::sin(phase);
          const double df = -md.cos_amp * std::sin(phase) + md.sin_amp * std::cos(phase);
          s.value(p, col) += f;
          for (int j = 0; j < dim && lvl >= 1; ++j) s.gradient[j](p, col) += md.k[j] * df;
          if (lvl >= 2) s.laplacian(p, col) -= k2 * f;
          for (int j = 0; j < dim && lvl >= 3; ++j) s.grad_laplacian[j](p, col) -= k2 * md.k[j] * df;
        }
      }
    return s;
  };
}

/// Coercivity with the potential shifted by V_m:
/// max over random v_N of (1/2 |||v_N|||^2 - a(v_N, v_N) + V_m ||v_N||^2) / |||v_N|||^2.
inline Check check_coercivity(const RunResult& r, int samples, unsigned seed, double tol = 1e-9) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Eigen::Index n = r.op.dofs();
  double worst = -std::numeric_limits<double>::infinity();
  const int batch = 50;
  for (int done = 0; done < samples; done += batch) {
    const int m = std::min(batch, samples - done);
    Eigen::MatrixXd c(n, m);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = normal(rng);
    const GridFunction v = r.basis.expand(c);
    for (int j = 0; j < m; ++j) {
      const double a = c.col(j).dot(r.op.stiffness * c.col(j)) -
                       r.grid_potential.minimum * c.col(j).dot(r.op.mass * c.col(j));
      const double e2 = energy_norm_squares(v, r.mesh, r.quad, r.constants, r.grid_potential, j).sum();
      worst = std::max(worst, (0.5 * e2 - a) / e2);
    }
  }
  std::ostringstream os;
  os << samples << " random vectors, dof " << n;
  return make_check("coercivity", worst, tol, os.str());
}

/// Projection identities on random smooth fields, per element:
/// mean preservation, gradient orthogonality, gradient and energy stability,
/// idempotence.
inline Check check_projections(const RunResult& r, int samples, unsigned seed, double tol = 1e-10) {
  std::mt19937_64 rng(seed);
  const Sampler f = random_trig_sampler(r.mesh.dim(), r.mesh.lengths(), samples, 4, rng);
  double worst = 0.0;
  std::string where;
  for (std::size_t e = 0; e < r.mesh.size(); ++e) {
    const ElementGrid& g = r.quad.element(e);
    const ElementBasis& b = r.basis.elements[e];
    const Samples v = f(g.points, Derivs::gradient);
    const Eigen::MatrixXd coeffs = b.project(v, g);
    const Samples pv = b.field.interior.combine(coeffs);
    const Samples err = lincomb(1.0, v, -1.0, pv);
    auto record = [&](double x, const char* what) {
      if (x > worst) {
        worst = x;
        where = std::string(what) + " on element " + std::to_string(e);
      }
    };
    const Eigen::MatrixXd ev = energy_inner(v, v, g);
    const Eigen::MatrixXd ee = energy_inner(err, err, g);
    const Eigen::MatrixXd gram_grad = energy_inner(b.field.interior, err, g) -
                                      g.weights.sum() * project_constant(b.field.interior.value, g).transpose() *
                                          project_constant(err.value, g);
    for (int j = 0; j < samples; ++j) {
      const double scale = std::sqrt(ev(j, j));
      record(std::abs(project_constant(err.value.col(j), g)(0)) * std::sqrt(g.weights.sum()) / scale,
             "mean");
      record(gram_grad.col(j).cwiseAbs().cwiseQuotient(b.gram.diagonal().cwiseSqrt()).maxCoeff() / scale,
             "gradient orthogonality");
      double grad_v = 0.0, grad_e = 0.0;
      for (int a = 0; a < r.mesh.dim(); ++a) {
        grad_v += (v.gradient[a].col(j).array().square() * g.weights.array()).sum();
        grad_e += (err.gradient[a].col(j).array().square() * g.weights.array()).sum();
      }
      record(std::max(0.0, std::sqrt(grad_e) - std::sqrt(grad_v)) / scale, "gradient stability");
      record(std::max(0.0, std::sqrt(ee(j, j)) - std::sqrt(ev(j, j))) / scale, "energy stability");
    }
    const Eigen::MatrixXd again = b.project(pv, g);
    record((again - coeffs).cwiseAbs().maxCoeff() / std::max(1.0, coeffs.cwiseAbs().maxCoeff()),
           "idempotence");
  }
  return make_check("projections", worst, tol,
                    std::to_string(samples) + " fields per element; worst: " + where);
}

/// d for the basis {1, x} on [0, h] against sqrt(2/h).
inline Check check_two_function_d(double h = 0.7, int order = 8, double tol = 1e-10) {
  const Partition mesh = Partition::build(1, {3.0 * h}, {3});
  const QuadGrid quad = QuadGrid::build(mesh, order);
  Sampler linear = [](const Eigen::MatrixXd& pts, Derivs level) {
    const Eigen::Index n = pts.rows();
    const int lvl = static_cast<int>(level);
    Samples s;
    s.value.resize(n, 2);
    s.value.col(0).setOnes();
    s.value.col(1) = pts.col(0);
    if (lvl >= 1) {
      Eigen::MatrixXd g(n, 2);
      g.col(0).setZero();
      g.col(1).setOnes();
      s.gradient = {g};
    }
    if (lvl >= 2) s.laplacian = Eigen::MatrixXd::Zero(n, 2);
    if (lvl >= 3) s.grad_laplacian = {Eigen::MatrixXd::Zero(n, 2)};
    return s;
  };
  const ElementBasis b = ElementBasis::build(quad.element(0), linear);
  const double d = compute_d(b, quad.element(0));
  const double exact = std::sqrt(2.0 / h);
  std::ostringstream os;
  os.precision(17);
  os << "h = " << h << ", d = " << d << ", sqrt(2/h) = " << exact;
  return make_check("constants: d for {1, x}", std::abs(d - exact) / exact, tol, os.str());
}

/// a and b never increase when V_N(k) is enriched: runs the constants for
/// each N (ascending) and reports the largest relative increase.
inline Check check_constant_monotonicity(const RunConfig& cfg, const std::vector<int>& ns,
                                         double tol = 1e-10) {
  std::vector<LocalConstants> ks;
  for (int n : ns) ks.push_back(run_constants(cfg, n).constants);
  double worst = 0.0;
  for (std::size_t s = 1; s < ks.size(); ++s)
    for (Eigen::Index e = 0; e < ks[s].a.size(); ++e) {
      worst = std::max(worst, (ks[s].a(e) - ks[s - 1].a(e)) / ks[s - 1].a(e));
      worst = std::max(worst, (ks[s].b(e) - ks[s - 1].b(e)) / ks[s - 1].b(e));
    }
  std::string list;
  for (int n : ns) list += (list.empty() ? "" : "->") + std::to_string(n);
  return make_check("constants: a, b monotone", worst, tol, "N = " + list);
}

/// Sampled slack of the d, a and b inequalities on random members of V_N(k)
/// and of its complement in the fine space.
inline Check check_constant_inequalities(const RunResult& r, int samples, unsigned seed,
                                         double tol = 1e-10) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  std::string where;
  for (std::size_t e = 0; e < r.mesh.size(); ++e) {
    const ElementGrid& g = r.quad.element(e);
    const ElementBasis& b = r.basis.elements[e];
    Eigen::MatrixXd normal_form = Eigen::MatrixXd::Zero(b.size(), b.size());
    for (std::size_t lf = 0; lf < g.face_weights.size(); ++lf) {
      const Eigen::MatrixXd& dn = b.field.faces[lf].gradient[face_axis(static_cast<int>(lf))];
      normal_form += dn.transpose() * g.face_weights[lf].asDiagonal() * dn;
    }
    const FineSpace fine = FineSpace::build(r.mesh.element(e).box, r.constants.fine_degree);
    Eigen::MatrixXd z;
    compute_ab(b, fine, &z);
    const double d = r.constants.d(e), a = r.constants.a(e), bb = r.constants.b(e);
    for (int s = 0; s < samples; ++s) {
      Eigen::VectorXd c(b.size());
      for (auto& x : c) x = normal(rng);
      const double energy = std::sqrt(c.dot(b.gram * c));
      const double slack_d = std::sqrt(c.dot(normal_form * c)) / energy - d;
      Eigen::VectorXd y(z.cols());
      for (auto& x : y) x = normal(rng);
      const Eigen::VectorXd v = z * y;
      const double ev = std::sqrt(v.dot(fine.energy * v));
      const double slack_a = std::sqrt(v.dot(fine.mass * v)) / ev - a;
      const double slack_b = std::sqrt(v.dot(fine.boundary * v)) / ev - bb;
      const double local = std::max({slack_d / std::max(1.0, d), slack_a / std::max(1.0, a),
                                     slack_b / std::max(1.0, bb)});
      if (local > worst) {
        worst = local;
        where = "element " + std::to_string(e);
      }
    }
  }
  return make_check("constants: sampled inequalities", worst, tol,
                    std::to_string(samples) + " samples per element" +
                        (where.empty() ? std::string() : "; worst on " + where));
}

/// Alignment recovers a sign-flipped basis exactly, an orthogonally mixed
/// (degenerate) basis to round-off, and is idempotent.
inline std::vector<Check> check_alignment(unsigned seed, Eigen::Index points = 200,
                                          Eigen::Index m = 6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.5, 1.5);
  Eigen::VectorXd w(points);
  for (auto& x : w) x = uniform(rng);
  Eigen::MatrixXd raw(points, m);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = normal(rng);
  // W-orthonormal columns
  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * raw);
  const Eigen::MatrixXd u =
      sw.cwiseInverse().asDiagonal() * (qr.householderQ() * Eigen::MatrixXd::Identity(points, m));

  std::vector<Check> out;
  Eigen::VectorXd signs(m);
  for (Eigen::Index i = 0; i < m; ++i) signs(i) = (i % 2 == 0) ? -1.0 : 1.0;
  const Eigen::MatrixXd flipped = u * signs.asDiagonal();
  std::vector<std::vector<Eigen::Index>> singles;
  for (Eigen::Index i = 0; i < m; ++i) singles.push_back({i});
  out.push_back(make_check("alignment: sign flip",
                           (align(flipped, u, w, singles) - u).cwiseAbs().maxCoeff(), 1e-12));

  Eigen::MatrixXd q_raw(m, m);
  for (Eigen::Index i = 0; i < q_raw.size(); ++i) q_raw.data()[i] = normal(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(q_raw).householderQ();
  const Eigen::MatrixXd mixed = u * q;
  const std::vector<std::vector<Eigen::Index>> one_group = degenerate_groups(Eigen::VectorXd::Ones(m));
  out.push_back(make_check("alignment: orthogonal mixing",
                           (align(mixed, u, w, one_group) - u).cwiseAbs().maxCoeff(), 1e-10));

  // A perturbed subspace: aligning twice equals aligning once.
  Eigen::MatrixXd noise(points, m);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = 1e-3 * normal(rng);
  Eigen::MatrixXd near = u * q + noise;
  Eigen::HouseholderQR<Eigen::MatrixXd> qn(sw.asDiagonal() * near);
  near = sw.cwiseInverse().asDiagonal() * (qn.householderQ() * Eigen::MatrixXd::Identity(points, m));
  const Eigen::MatrixXd once = align(near, u, w, one_group);
  // Re-orthonormalize the aligned columns and align again.
  Eigen::HouseholderQR<Eigen::MatrixXd> qo(sw.asDiagonal() * once);
  Eigen::MatrixXd basis_once = sw.cwiseInverse().asDiagonal() *
                               (qo.householderQ() * Eigen::MatrixXd::Identity(points, m));
  const Eigen::MatrixXd twice = align(basis_once, u, w, one_group);
  out.push_back(make_check("alignment: idempotence", (twice - once).cwiseAbs().maxCoeff(), 1e-10));
  return out;
}

/// Free Laplacian on [0, 2 pi]^dim against {|k|^2}, and eigenvalues under a
/// constant shift of the potential.
inline std::vector<Check> check_spectral_oracle(const RunConfig& cfg, Eigen::Index m = 11) {
  std::vector<Check> out;
  {
    PotentialSpec free;
    free.dim = 1;
    free.lengths = {2.0 * std::numbers::pi};
    const Potential v(free);
    Box box;
    box.dim = 1;
    box.width[0] = 2.0 * std::numbers::pi;
    const PlanewaveSolution pw = solve_planewave(v, box, {33}, m);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double k = static_cast<double>((i + 1) / 2);
      worst = std::max(worst, std::abs(pw.eigenvalues(i) - k * k));
    }
    out.push_back(make_check("spectral: free Laplacian", worst, 1e-12));
  }
  {
    const double shift = 3.25;
    PotentialSpec shifted = cfg.potential;
    shifted.offset += shift;
    Box domain;
    domain.dim = cfg.dim;
    for (int j = 0; j < cfg.dim; ++j) domain.width[j] = cfg.lengths[j];
    std::vector<int> wc = cfg.reference_wavecount;
    for (int& c : wc) c = std::min(c, cfg.dim == 1 ? 129 : 25);
    const PlanewaveSolution base = solve_planewave(Potential(cfg.potential), domain, wc, m);
    const PlanewaveSolution moved = solve_planewave(Potential(shifted), domain, wc, m);
    const double worst = (moved.eigenvalues - base.eigenvalues - Eigen::VectorXd::Constant(m, shift))
                             .cwiseAbs()
                             .maxCoeff();
    out.push_back(make_check("spectral: shift covariance", worst, 1e-10));
  }
  return out;
}

/// Relative residual of piecewise integration by parts on random smooth
/// fields and on the discrete eigenfunctions (broken fields).
inline std::vector<Check> check_integration_by_parts(const RunResult& r, unsigned seed,
                                                     double tol = 1e-8) {
  std::mt19937_64 rng(seed);
  const GridFunction smooth = GridFunction::sample(
      r.quad, random_trig_sampler(r.mesh.dim(), r.mesh.lengths(), 4, 3, rng), Derivs::laplacian);
  double worst_smooth = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      const IntegrationByParts s = integration_by_parts_sides(smooth, smooth, r.mesh, r.quad, i, j);
      worst_smooth = std::max(worst_smooth, s.residual() / s.scale());
    }
  double worst_alb = 0.0;
  const GridFunction& u = r.solution.fields;
  const Eigen::Index m = std::min<Eigen::Index>(u.cols(), 4);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const IntegrationByParts s = integration_by_parts_sides(u, u, r.mesh, r.quad, i, j);
      worst_alb = std::max(worst_alb, s.residual() / s.scale());
    }
  return {make_check("integration by parts: smooth fields", worst_smooth, tol),
          make_check("integration by parts: ALB fields", worst_alb, tol)};
}

}  // namespace eigbound
