// Command-line runner: run, sweep, constants, reference, selftest.

#include "eigbound/checks.hpp"
#include "eigbound/io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace eigbound;

namespace {

constexpr int kExitViolation = 2;
constexpr int kExitError = 1;

struct Common {
  std::string config_file;
  std::string preset_name;
  std::string out;
  int threads = 0;
  bool diagnostics = false;
  bool skip_reference = false;
  std::vector<int> ns;
  std::string save_basis;
  std::string load_basis;
};

void add_common(CLI::App* app, Common& c, bool with_run_flags) {
  auto* cfg = app->add_option("-c,--config", c.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--preset", c.preset_name, "built-in configuration (paper-1d, paper-2d)")->excludes(cfg);
  app->add_option("--out", c.out, "output directory (overrides the configuration)");
  app->add_option("--threads", c.threads, "worker thread cap (default: EIGBOUND_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app->add_option("--N", c.ns, "basis functions per element; comma separated list")->delimiter(',');
  if (with_run_flags) {
    app->add_flag("--diagnostics", c.diagnostics, "also compute estimators with the true d^u");
    app->add_flag("--skip-reference", c.skip_reference, "no reference solve; errors reported as NA");
    app->add_option("--save-basis", c.save_basis, "write the element bases to this file");
    app->add_option("--load-basis", c.load_basis, "read the element bases from this file")
        ->check(CLI::ExistingFile);
  }
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config_file.empty())
    cfg = load_config(c.config_file);
  else
    cfg = preset(c.preset_name.empty() ? "paper-1d" : c.preset_name);
  if (!c.out.empty()) cfg.output = c.out;
  if (!c.ns.empty()) cfg.basis_functions = c.ns;
  if (c.diagnostics) cfg.diagnostics = true;
  if (c.skip_reference) cfg.skip_reference = true;
  if (c.threads > 0) set_max_threads(static_cast<std::size_t>(c.threads));
  cfg.validate();
  return cfg;
}

std::string cell(double v, const char* format) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void print_report(const RunResult& r) {
  std::printf("%s: N = %d, %zu elements, %ld dof, %.1f s\n", r.config.name.c_str(), r.n, r.mesh.size(),
              static_cast<long>(r.op.dofs()), r.timings.total);
  std::printf("%3s %14s %10s %10s %10s %10s %7s %7s\n", "i", "lambda_dg", "err_lambda", "err_energy",
              "eta", "xi", "C_eta", "C_xi");
  for (const ReportRow& row : r.report.rows)
    std::printf("%3d %14.8f %10s %10s %10.3e %10.3e %7s %7s%s\n", row.index, row.lambda_dg,
                cell(row.err_lambda, "%.3e").c_str(), cell(row.err_energy, "%.3e").c_str(), row.eta, row.xi,
                cell(row.c_eta, "%.4f").c_str(), cell(row.c_xi, "%.4f").c_str(),
                row.upper_violation || row.lower_violation ? "  VIOLATION" : "");
}

std::optional<BasisSet> read_basis(const Common& c, const RunConfig& cfg) {
  if (c.load_basis.empty()) return std::nullopt;
  std::ifstream in(c.load_basis);
  if (!in) throw std::runtime_error("cannot open " + c.load_basis);
  return load_basis(in, cfg);
}

int cmd_run(const Common& c) {
  const RunConfig cfg = resolve(c);
  const std::optional<BasisSet> basis = read_basis(c, cfg);
  const int n = cfg.basis_functions.front();
  const RunResult r = run_pipeline(cfg, n, basis ? &*basis : nullptr);
  write_run(cfg.output, r);
  if (!c.save_basis.empty())
    write_file(c.save_basis, [&](std::ostream& o) { save_basis(o, r.basis, cfg, n); });
  print_report(r);
  std::printf("results written to %s\n", cfg.output.c_str());
  return r.report.any_violation() ? kExitViolation : 0;
}

int cmd_sweep(const Common& c) {
  const RunConfig cfg = resolve(c);
  const std::vector<RunResult> runs = run_sweep(cfg);
  bool violation = false;
  for (const RunResult& r : runs) {
    write_run(fs::path(cfg.output) / ("N" + std::to_string(r.n)), r);
    print_report(r);
    violation = violation || r.report.any_violation();
  }
  write_file(fs::path(cfg.output) / "sweep_summary.csv",
             [&](std::ostream& o) { write_sweep_summary(o, runs); });
  std::printf("results written to %s\n", cfg.output.c_str());
  return violation ? kExitViolation : 0;
}

int cmd_constants(const Common& c) {
  const RunConfig cfg = resolve(c);
  const RunResult r = run_constants(cfg, cfg.basis_functions.front());
  write_file(fs::path(cfg.output) / "constants.csv",
             [&](std::ostream& o) { write_constants_csv(o, r.constants); });
  write_constants_csv(std::cout, r.constants);
  return 0;
}

int cmd_reference(const Common& c) {
  const RunConfig cfg = resolve(c);
  const ReferenceSolution ref = run_reference(cfg);
  write_file(fs::path(cfg.output) / "reference.csv",
             [&](std::ostream& o) { write_reference_csv(o, ref.eigenvalues); });
  write_reference_csv(std::cout, ref.eigenvalues);
  return 0;
}

int cmd_selftest(const Common& c, int samples) {
  const RunConfig cfg = resolve(c);
  const RunResult r = run_pipeline(cfg, cfg.basis_functions.front());
  std::vector<Check> checks;
  checks.push_back(check_coercivity(r, samples, cfg.seed));
  checks.push_back(check_projections(r, std::max(1, samples / 10), cfg.seed + 1));
  checks.push_back(check_two_function_d());
  checks.push_back(check_constant_inequalities(r, samples, cfg.seed + 2));
  for (Check& x : check_alignment(cfg.seed + 3)) checks.push_back(std::move(x));
  for (Check& x : check_spectral_oracle(cfg)) checks.push_back(std::move(x));
  for (Check& x : check_integration_by_parts(r, cfg.seed + 4)) checks.push_back(std::move(x));
  int failed = 0;
  for (const Check& x : checks) {
    std::printf("%s %-36s %.3e (tolerance %.1e)%s%s\n", x.passed ? "PASS" : "FAIL", x.name.c_str(),
                x.value, x.tolerance, x.detail.empty() ? "" : "  ", x.detail.c_str());
    failed += x.passed ? 0 : 1;
  }
  std::printf("%zu checks, %d failed\n", checks.size(), failed);
  return failed ? kExitError : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discontinuous Galerkin eigenvalue solver with a posteriori error bounds"};
  app.require_subcommand(1);
  Common run, sweep, constants, reference, selftest;
  int samples = 1000;
  add_common(app.add_subcommand("run", "solve, estimate and write the effectivity report"), run, true);
  add_common(app.add_subcommand("sweep", "run for several N and summarize convergence"), sweep, false);
  add_common(app.add_subcommand("constants", "compute the local constants only"), constants, false);
  add_common(app.add_subcommand("reference", "planewave reference eigenvalues only"), reference, false);
  CLI::App* st = app.add_subcommand("selftest", "property checks on the configured discretization");
  add_common(st, selftest, false);
  st->add_option("--samples", samples, "random samples per check")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return cmd_run(run);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep);
    if (app.got_subcommand("constants")) return cmd_constants(constants);
    if (app.got_subcommand("reference")) return cmd_reference(reference);
    if (app.got_subcommand("selftest")) return cmd_selftest(selftest, samples);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return 0;
}
