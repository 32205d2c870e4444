#pragma once

// End-to-end run: basis, constants, discrete solve, estimators and, when a
// reference is requested, alignment, errors and effectivity indices.

#include "eigbound/basis.hpp"
#include "eigbound/constants.hpp"
#include "eigbound/dg.hpp"
#include "eigbound/estimators.hpp"
#include "eigbound/mesh.hpp"
#include "eigbound/report.hpp"
#include "eigbound/spectral.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

struct RunConfig {
  std::string name = "custom";
  int dim = 1;
  std::vector<double> lengths{2.0 * std::numbers::pi};
  std::vector<int> counts{7};
  PotentialSpec potential;
  std::vector<int> basis_functions{6};  // N; several values form a sweep
  int eigenpairs = 11;
  double theta = 1.0;
  double gamma_factor = 1.0;
  int quadrature_order = 32;
  std::vector<int> reference_wavecount{257};
  std::vector<int> alb_wavecount{129};
  int fine_degree = 0;  // 0: quadrature order - 1
  double drop_tol = 1e-8;
  double representation_tol = 1e-8;  // gate on embedding V_N(k) into the fine space
  int bubble_modes = 0;  // 0: half the quadrature order
  std::string output = "out";
  unsigned seed = 1;
  bool diagnostics = false;
  bool theorem_bounds = true;
  bool skip_reference = false;

  void validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (dim < 1 || dim > kMaxDim) fail("dim must be 1, 2 or 3");
    if (static_cast<int>(lengths.size()) != dim) fail("lengths needs one entry per dimension");
    if (static_cast<int>(counts.size()) != dim) fail("counts needs one entry per dimension");
    if (potential.dim != dim || potential.lengths != lengths)
      fail("potential dimension/period must match the domain");
    potential.validate();
    if (basis_functions.empty()) fail("at least one value of N is required");
    for (int n : basis_functions)
      if (n < 2) fail("N must be at least 2");
    if (eigenpairs < 1) fail("eigenpairs must be positive");
    if (quadrature_order < 2) fail("quadrature_order must be at least 2");
    if (static_cast<int>(reference_wavecount.size()) != dim) fail("reference_wavecount needs one entry per dimension");
    if (static_cast<int>(alb_wavecount.size()) != dim) fail("alb_wavecount needs one entry per dimension");
    if (fine_degree < 0) fail("fine_degree must be non-negative");
    if (!(drop_tol > 0.0)) fail("drop_tol must be positive");
    if (!(representation_tol > 0.0)) fail("representation_tol must be positive");
    if (!(gamma_factor >= 1.0)) fail("gamma_factor must be at least 1");
    if (bubble_modes < 0) fail("bubble_modes must be non-negative");
    if (bubble_modes > quadrature_order) fail("bubble_modes must not exceed quadrature_order");
  }
};

/// Three negative Gaussians on [0, 2 pi]; three negative eigenvalues.
inline PotentialSpec preset_potential_1d() {
  PotentialSpec p;
  p.dim = 1;
  p.lengths = {2.0 * std::numbers::pi};
  const double mags[3] = {-40.0, -60.0, -50.0};
  for (int j = 0; j < 3; ++j)
    p.bumps.push_back({{0.9 * 2.0 * std::numbers::pi / 3.0 * (j + 0.15)}, 0.10, mags[j]});
  return p;
}

/// Four negative Gaussians on [0, 2 pi]^2.
inline PotentialSpec preset_potential_2d() {
  PotentialSpec p;
  p.dim = 2;
  p.lengths = {2.0 * std::numbers::pi, 2.0 * std::numbers::pi};
  const double c = 2.0 * std::numbers::pi;
  p.bumps.push_back({{0.22 * c, 0.30 * c}, 0.45, -6.0});
  p.bumps.push_back({{0.70 * c, 0.24 * c}, 0.45, -8.0});
  p.bumps.push_back({{0.35 * c, 0.74 * c}, 0.45, -7.0});
  p.bumps.push_back({{0.78 * c, 0.68 * c}, 0.45, -5.0});
  return p;
}

inline RunConfig preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  if (name == "paper-1d") {
    c.dim = 1;
    c.lengths = {2.0 * std::numbers::pi};
    c.counts = {7};
    c.potential = preset_potential_1d();
    c.basis_functions = {6};
    c.quadrature_order = 48;
    c.reference_wavecount = {257};
    c.alb_wavecount = {65};
  } else if (name == "paper-2d") {
    c.dim = 2;
    c.lengths = {2.0 * std::numbers::pi, 2.0 * std::numbers::pi};
    c.counts = {5, 5};
    c.potential = preset_potential_2d();
    c.basis_functions = {11};
    c.quadrature_order = 32;
    c.fine_degree = 27;
    c.reference_wavecount = {51, 51};
    c.alb_wavecount = {33, 33};
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (available: paper-1d, paper-2d)");
  }
  return c;
}

struct Timings {
  double basis = 0.0, constants = 0.0, solve = 0.0, estimators = 0.0, reference = 0.0, total = 0.0;
};

struct RunResult {
  RunConfig config;
  int n = 0;
  Partition mesh;
  QuadGrid quad;
  std::optional<Potential> potential;
  GridPotential grid_potential;
  BasisSet basis;
  LocalConstants constants;
  DiscreteOperator op;
  EigenSolution solution;
  EstimatorBundle bundle;
  std::optional<ReferenceSolution> reference;
  std::vector<std::vector<Eigen::Index>> groups;
  std::optional<GridFunction> aligned;
  std::vector<PairError> errors;
  std::optional<EstimatorBundle> diagnostics;  // estimators with the true d^u
  std::vector<EigenvalueBounds> bounds;
  EffectivityReport report;
  Timings timings;
};

namespace detail {
class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};
}  // namespace detail

/// Mesh, quadrature and sampled potential for a configuration.
inline void prepare_geometry(const RunConfig& cfg, RunResult& r) {
  r.mesh = Partition::build(cfg.dim, cfg.lengths, cfg.counts);
  r.quad = QuadGrid::build(r.mesh, cfg.quadrature_order);
  r.potential.emplace(cfg.potential);
  r.grid_potential = GridPotential::sample(*r.potential, r.quad);
}

inline ConstantOptions constant_options(const RunConfig& cfg) {
  ConstantOptions copt;
  copt.theta = cfg.theta;
  copt.fine_degree = cfg.fine_degree;
  copt.gamma_factor = cfg.gamma_factor;
  copt.representation_tol = cfg.representation_tol;
  return copt;
}

/// Geometry, basis (generated unless `basis` is given) and local constants.
inline RunResult run_constants(const RunConfig& cfg, int n, const BasisSet* basis = nullptr) {
  cfg.validate();
  RunResult r;
  r.config = cfg;
  r.n = n;
  detail::Stopwatch clock;
  prepare_geometry(cfg, r);
  if (basis) {
    if (basis->elements.size() != r.mesh.size())
      throw std::invalid_argument("basis: element count does not match the mesh");
    r.basis = *basis;
  } else {
    r.basis = generate_alb(r.mesh, r.quad, *r.potential, {n, cfg.alb_wavecount, cfg.drop_tol});
  }
  r.timings.basis = clock.lap();
  r.constants = compute_constants(r.mesh, r.quad, r.basis, constant_options(cfg));
  r.timings.constants = clock.lap();
  return r;
}

inline RunResult run_pipeline(const RunConfig& cfg, int n, const BasisSet* basis = nullptr) {
  detail::Stopwatch total;
  RunResult r = run_constants(cfg, n, basis);
  detail::Stopwatch clock;

  r.op = assemble(r.mesh, r.quad, r.basis, r.grid_potential, r.constants);
  r.solution = solve_eig(r.op, r.basis, cfg.eigenpairs);
  r.timings.solve = clock.lap();

  EstimatorOptions eopt;
  eopt.bubble_modes = cfg.bubble_modes;
  r.bundle = compute_estimators(r.mesh, r.quad, r.solution.fields, r.solution.eigenvalues,
                                r.grid_potential, r.constants, nullptr, eopt);
  r.timings.estimators = clock.lap();

  if (!cfg.skip_reference) {
    r.reference = solve_reference(*r.potential, r.mesh, r.quad, cfg.reference_wavecount,
                                  cfg.eigenpairs);
    r.groups = degenerate_groups(r.reference->eigenvalues);
    r.aligned = align_fields(r.solution.fields, r.reference->fields, r.quad, r.groups);
    r.errors = measure_errors(*r.aligned, r.solution.eigenvalues, r.reference->fields,
                              r.reference->eigenvalues, r.mesh, r.quad, r.constants,
                              r.grid_potential);
    for (Eigen::Index i = 0; i < cfg.eigenpairs; ++i)
      add_reference_terms(r.bundle.pairs[i], r.mesh, r.quad, r.reference->fields,
                          r.reference->eigenvalues(i), *r.aligned, r.errors[i].err_l2,
                          r.errors[i].err_energy, r.grid_potential.minimum, i);
    if (cfg.diagnostics) {
      const GridFunction diff = lincomb(1.0, r.reference->fields, -1.0, *r.aligned);
      Eigen::MatrixXd du(r.mesh.size(), cfg.eigenpairs);
      for (Eigen::Index i = 0; i < cfg.eigenpairs; ++i) du.col(i) = true_du(diff, r.mesh, r.quad, i);
      r.diagnostics = compute_estimators(r.mesh, r.quad, *r.aligned, r.solution.eigenvalues,
                                         r.grid_potential, r.constants, &du, eopt);
      for (Eigen::Index i = 0; i < cfg.eigenpairs; ++i)
        add_reference_terms(r.diagnostics->pairs[i], r.mesh, r.quad, r.reference->fields,
                            r.reference->eigenvalues(i), *r.aligned, r.errors[i].err_l2,
                            r.errors[i].err_energy, r.grid_potential.minimum, i);
    }
    r.timings.reference = clock.lap();
  }

  for (Eigen::Index i = 0; i < cfg.eigenpairs; ++i) {
    std::optional<ReferenceTerms> ref;
    if (r.reference && cfg.theorem_bounds)
      ref = ReferenceTerms{r.reference->eigenvalues(i), r.errors[i].err_l2, r.grid_potential.minimum};
    r.bounds.push_back(eigenvalue_bounds(r.bundle.pairs[i], r.constants, ref));
  }
  r.report = build_report(r.bundle, r.reference ? &r.errors : nullptr);
  r.timings.total = total.lap();
  return r;
}

/// One run per value of N in the configuration.
inline std::vector<RunResult> run_sweep(const RunConfig& cfg) {
  if (cfg.basis_functions.size() < 2)
    throw std::invalid_argument("sweep: at least two values of N are required");
  std::vector<RunResult> runs;
  for (int n : cfg.basis_functions) runs.push_back(run_pipeline(cfg, n));
  return runs;
}

/// Reference eigenpairs only.
inline ReferenceSolution run_reference(const RunConfig& cfg) {
  cfg.validate();
  RunResult r;
  prepare_geometry(cfg, r);
  return solve_reference(*r.potential, r.mesh, r.quad, cfg.reference_wavecount, cfg.eigenpairs);
}

}  // namespace eigbound
