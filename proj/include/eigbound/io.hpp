#pragma once

// Configuration files, result tables, plot data and basis files.

#include "eigbound/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

using json = nlohmann::json;

/// A configuration problem located in the source text.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& msg)
      : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                           msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < text.size() && i < offset; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

/// Line of the key path (each key searched after the previous one); 0 if absent.
inline int locate(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const std::size_t hit = text.find("\"" + key + "\"", pos);
    if (hit == std::string::npos) return 0;
    pos = hit + key.size() + 2;
  }
  return line_of_offset(text, pos);
}

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string name;
    for (const auto& k : path) name += (name.empty() ? "" : ".") + k;
    throw ConfigError(source_, locate(text_, path), name.empty() ? msg : "'" + name + "': " + msg);
  }

  void check_keys(const json& obj, const std::vector<std::string>& path,
                  const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      if (!allowed.count(key)) {
        std::vector<std::string> p = path;
        p.push_back(key);
        fail(p, "unknown key");
      }
    }
  }

  double number(const json& v, const std::vector<std::string>& path) const {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      // "pi", "2pi", "2*pi", "0.5 * pi"
      std::string s;
      for (char c : v.get<std::string>())
        if (c != ' ') s += c;
      if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
        std::string head = s.substr(0, s.size() - 2);
        if (!head.empty() && head.back() == '*') head.pop_back();
        try {
          std::size_t used = 0;
          const double k = head.empty() ? 1.0 : std::stod(head, &used);
          if (head.empty() || used == head.size()) return k * std::numbers::pi;
        } catch (const std::exception&) {
        }
      }
    }
    fail(path, "expected a number (or a multiple of pi such as \"2pi\")");
  }

  int integer(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
  }

  bool boolean(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(number(x, path));
    return out;
  }

  std::vector<int> integers(const json& v, const std::vector<std::string>& path) const {
    if (v.is_number_integer()) return {v.get<int>()};
    if (!v.is_array()) fail(path, "expected an integer or an array of integers");
    std::vector<int> out;
    for (const auto& x : v) out.push_back(integer(x, path));
    return out;
  }

 private:
  const std::string& text_;
  std::string source_;
};

}  // namespace detail

/// Parses a JSON run configuration. Keys not given keep the values of
/// `preset` (when named) or the built-in defaults.
inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(source, detail::line_of_offset(text, e.byte), e.what());
  }
  const detail::ConfigReader rd(text, source);
  rd.check_keys(root, {},
                {"name", "preset", "domain", "potential", "basis", "discretization", "estimators",
                 "reference", "eigenpairs", "output", "seed", "flags"});

  RunConfig c;
  if (root.contains("preset")) {
    const std::string name = rd.string(root["preset"], {"preset"});
    try {
      c = preset(name);
    } catch (const std::invalid_argument& e) {
      rd.fail({"preset"}, e.what());
    }
  }
  if (root.contains("name")) c.name = rd.string(root["name"], {"name"});

  if (root.contains("domain")) {
    const json& d = root["domain"];
    rd.check_keys(d, {"domain"}, {"dim", "lengths", "counts"});
    if (d.contains("dim")) c.dim = rd.integer(d["dim"], {"domain", "dim"});
    if (d.contains("lengths")) c.lengths = rd.numbers(d["lengths"], {"domain", "lengths"});
    if (d.contains("counts")) c.counts = rd.integers(d["counts"], {"domain", "counts"});
  }

  c.potential.dim = c.dim;
  c.potential.lengths = c.lengths;
  if (root.contains("potential")) {
    const json& p = root["potential"];
    rd.check_keys(p, {"potential"}, {"gaussians", "offset", "image_radius"});
    if (p.contains("offset")) c.potential.offset = rd.number(p["offset"], {"potential", "offset"});
    if (p.contains("image_radius"))
      c.potential.image_radius = rd.integer(p["image_radius"], {"potential", "image_radius"});
    if (p.contains("gaussians")) {
      const json& list = p["gaussians"];
      if (!list.is_array()) rd.fail({"potential", "gaussians"}, "expected an array");
      c.potential.bumps.clear();
      for (const json& g : list) {
        rd.check_keys(g, {"potential", "gaussians"}, {"center", "width", "magnitude"});
        Gaussian bump;
        if (!g.contains("center") || !g.contains("width") || !g.contains("magnitude"))
          rd.fail({"potential", "gaussians"}, "each Gaussian needs center, width and magnitude");
        bump.center = rd.numbers(g["center"], {"potential", "gaussians", "center"});
        bump.width = rd.number(g["width"], {"potential", "gaussians", "width"});
        bump.magnitude = rd.number(g["magnitude"], {"potential", "gaussians", "magnitude"});
        c.potential.bumps.push_back(std::move(bump));
      }
    }
  }

  if (root.contains("basis")) {
    const json& b = root["basis"];
    rd.check_keys(b, {"basis"}, {"N", "wavecount", "drop_tol"});
    if (b.contains("N")) c.basis_functions = rd.integers(b["N"], {"basis", "N"});
    if (b.contains("wavecount")) c.alb_wavecount = rd.integers(b["wavecount"], {"basis", "wavecount"});
    if (b.contains("drop_tol")) c.drop_tol = rd.number(b["drop_tol"], {"basis", "drop_tol"});
  }

  if (root.contains("discretization")) {
    const json& d = root["discretization"];
    rd.check_keys(d, {"discretization"},
                  {"theta", "gamma_factor", "quadrature_order", "fine_degree", "representation_tol"});
    if (d.contains("theta")) c.theta = rd.number(d["theta"], {"discretization", "theta"});
    if (d.contains("gamma_factor"))
      c.gamma_factor = rd.number(d["gamma_factor"], {"discretization", "gamma_factor"});
    if (d.contains("quadrature_order"))
      c.quadrature_order = rd.integer(d["quadrature_order"], {"discretization", "quadrature_order"});
    if (d.contains("fine_degree"))
      c.fine_degree = rd.integer(d["fine_degree"], {"discretization", "fine_degree"});
    if (d.contains("representation_tol"))
      c.representation_tol =
          rd.number(d["representation_tol"], {"discretization", "representation_tol"});
  }

  if (root.contains("estimators")) {
    const json& e = root["estimators"];
    rd.check_keys(e, {"estimators"}, {"bubble_modes"});
    if (e.contains("bubble_modes"))
      c.bubble_modes = rd.integer(e["bubble_modes"], {"estimators", "bubble_modes"});
  }

  if (root.contains("reference")) {
    const json& r = root["reference"];
    rd.check_keys(r, {"reference"}, {"wavecount", "skip"});
    if (r.contains("wavecount"))
      c.reference_wavecount = rd.integers(r["wavecount"], {"reference", "wavecount"});
    if (r.contains("skip")) c.skip_reference = rd.boolean(r["skip"], {"reference", "skip"});
  }

  if (root.contains("eigenpairs")) c.eigenpairs = rd.integer(root["eigenpairs"], {"eigenpairs"});
  if (root.contains("output")) c.output = rd.string(root["output"], {"output"});
  if (root.contains("seed")) {
    const int seed = rd.integer(root["seed"], {"seed"});
    if (seed < 0) rd.fail({"seed"}, "must be non-negative");
    c.seed = static_cast<unsigned>(seed);
  }
  if (root.contains("flags")) {
    const json& f = root["flags"];
    rd.check_keys(f, {"flags"}, {"diagnostics", "theorem_bounds"});
    if (f.contains("diagnostics")) c.diagnostics = rd.boolean(f["diagnostics"], {"flags", "diagnostics"});
    if (f.contains("theorem_bounds"))
      c.theorem_bounds = rd.boolean(f["theorem_bounds"], {"flags", "theorem_bounds"});
  }

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    // validate() names the offending field first; point at it in the text
    static const std::vector<std::pair<std::string, std::vector<std::string>>> fields = {
        {"config: dim", {"domain", "dim"}},
        {"config: lengths", {"domain", "lengths"}},
        {"config: counts", {"domain", "counts"}},
        {"config: potential", {"potential"}},
        {"config: at least one value of N", {"basis", "N"}},
        {"config: N ", {"basis", "N"}},
        {"config: eigenpairs", {"eigenpairs"}},
        {"config: quadrature_order", {"discretization", "quadrature_order"}},
        {"config: reference_wavecount", {"reference", "wavecount"}},
        {"config: alb_wavecount", {"basis", "wavecount"}},
        {"config: fine_degree", {"discretization", "fine_degree"}},
        {"config: drop_tol", {"basis", "drop_tol"}},
        {"config: representation_tol", {"discretization", "representation_tol"}},
        {"config: gamma_factor", {"discretization", "gamma_factor"}},
        {"config: bubble_modes", {"estimators", "bubble_modes"}},
    };
    const std::string msg = e.what();
    int line = 0;
    for (const auto& [prefix, path] : fields)
      if (msg.rfind(prefix, 0) == 0) {
        line = detail::locate(text, path);
        break;
      }
    throw ConfigError(source, line, msg);
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

/// The configuration in the file schema (all keys explicit).
inline json config_to_json(const RunConfig& c) {
  json pot = {{"offset", c.potential.offset}, {"image_radius", c.potential.image_radius},
              {"gaussians", json::array()}};
  for (const Gaussian& g : c.potential.bumps)
    pot["gaussians"].push_back({{"center", g.center}, {"width", g.width}, {"magnitude", g.magnitude}});
  return {
      {"name", c.name},
      {"domain", {{"dim", c.dim}, {"lengths", c.lengths}, {"counts", c.counts}}},
      {"potential", pot},
      {"basis", {{"N", c.basis_functions}, {"wavecount", c.alb_wavecount}, {"drop_tol", c.drop_tol}}},
      {"discretization",
       {{"theta", c.theta},
        {"gamma_factor", c.gamma_factor},
        {"quadrature_order", c.quadrature_order},
        {"fine_degree", c.fine_degree},
        {"representation_tol", c.representation_tol}}},
      {"estimators", {{"bubble_modes", c.bubble_modes}}},
      {"reference", {{"wavecount", c.reference_wavecount}, {"skip", c.skip_reference}}},
      {"eigenpairs", c.eigenpairs},
      {"output", c.output},
      {"seed", c.seed},
      {"flags", {{"diagnostics", c.diagnostics}, {"theorem_bounds", c.theorem_bounds}}},
  };
}

/// FNV-1a of the canonical configuration (output directory excluded).
inline std::string config_hash(const RunConfig& c) {
  json j = config_to_json(c);
  j.erase("output");
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Shortest round-trip text for a double; "NA" for non-finite values.
inline std::string fmt(double x) {
  if (!std::isfinite(x)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline void write_constants_csv(std::ostream& out, const LocalConstants& k) {
  out << "element,a,b,d,gamma,gamma_hat,c\n";
  for (Eigen::Index e = 0; e < k.d.size(); ++e)
    out << e << ',' << fmt(k.a(e)) << ',' << fmt(k.b(e)) << ',' << fmt(k.d(e)) << ','
        << fmt(k.gamma(e)) << ',' << fmt(k.gamma_hat(e)) << ',' << fmt(k.c(e)) << '\n';
}

/// One row per (pair, element).
inline void write_estimators_csv(std::ostream& out, const EstimatorBundle& b) {
  out << "i,element,eta_R,eta_F,eta_J,c_R,c_F,c_J,xi_k,hot_lb_k,norm_R,norm_g_half_R,norm_g_R,"
         "norm_grad_gR_minus_phi,du,zero_residual\n";
  for (std::size_t i = 0; i < b.pairs.size(); ++i)
    for (std::size_t e = 0; e < b.pairs[i].elements.size(); ++e) {
      const ElementEstimate& s = b.pairs[i].elements[e];
      out << i + 1 << ',' << e << ',' << fmt(s.eta_r) << ',' << fmt(s.eta_f) << ',' << fmt(s.eta_j)
          << ',' << fmt(s.c_r) << ',' << fmt(s.c_f) << ',' << fmt(s.c_j) << ',' << fmt(s.xi) << ','
          << fmt(s.hot_lb) << ',' << fmt(s.residual_norm) << ',' << fmt(s.residual_half_norm) << ','
          << fmt(s.bubble_residual_norm) << ',' << fmt(s.bubble_gradient_norm) << ','
          << fmt(s.du) << ',' << (s.zero_residual ? 1 : 0) << '\n';
    }
}

inline json estimators_json(const EstimatorBundle& b) {
  json j = {{"b_omega", std::vector<double>(b.b_omega.data(), b.b_omega.data() + b.b_omega.size())},
            {"pairs", json::array()}};
  for (std::size_t i = 0; i < b.pairs.size(); ++i) {
    const PairEstimate& p = b.pairs[i];
    json pj = {{"i", i + 1},          {"lambda_dg", p.lambda_n}, {"eta", num(p.eta)},
               {"xi", num(p.xi)},     {"xi_flag", p.xi_flag},    {"hot_ub", num(p.hot_ub)},
               {"hot_lb", num(p.hot_lb)}, {"elements", json::array()}};
    for (const ElementEstimate& s : p.elements)
      pj["elements"].push_back({{"eta_R", num(s.eta_r)},
                                {"eta_F", num(s.eta_f)},
                                {"eta_J", num(s.eta_j)},
                                {"c_R", num(s.c_r)},
                                {"c_F", num(s.c_f)},
                                {"c_J", num(s.c_j)},
                                {"xi", num(s.xi)},
                                {"hot_lb", num(s.hot_lb)},
                                {"norm_R", num(s.residual_norm)},
                                {"norm_g_half_R", num(s.residual_half_norm)},
                                {"norm_g_R", num(s.bubble_residual_norm)},
                                {"norm_grad_gR_minus_phi", num(s.bubble_gradient_norm)},
                                {"du", num(s.du)},
                                {"zero_residual", s.zero_residual}});
    j["pairs"].push_back(std::move(pj));
  }
  return j;
}

inline const char* kReportColumns =
    "i,lambda_ref,lambda_dg,err_lambda,err_energy,eta,xi,hot_ub,hot_lb,C_eta,C_xi,Clam_eta,Clam_xi";

inline void write_report_csv(std::ostream& out, const EffectivityReport& rep) {
  out << kReportColumns << '\n';
  for (const ReportRow& r : rep.rows)
    out << r.index << ',' << fmt(r.lambda_ref) << ',' << fmt(r.lambda_dg) << ','
        << fmt(r.err_lambda) << ',' << fmt(r.err_energy) << ',' << fmt(r.eta) << ',' << fmt(r.xi)
        << ',' << fmt(r.hot_ub) << ',' << fmt(r.hot_lb) << ',' << fmt(r.c_eta) << ','
        << fmt(r.c_xi) << ',' << fmt(r.clam_eta) << ',' << fmt(r.clam_xi) << '\n';
}

inline void write_bounds_csv(std::ostream& out, const RunResult& r) {
  out << "i,lambda_dg,upper_eta2,lower_xi2,upper_theorem,upper_theorem_stated,lower_theorem_lhs,"
         "lower_theorem_rhs\n";
  for (std::size_t i = 0; i < r.bounds.size(); ++i) {
    const EigenvalueBounds& b = r.bounds[i];
    out << i + 1 << ',' << fmt(r.solution.eigenvalues(static_cast<Eigen::Index>(i))) << ','
        << fmt(b.upper) << ',' << fmt(b.lower) << ',' << fmt(b.upper_theorem) << ','
        << fmt(b.upper_theorem_stated) << ',' << fmt(b.lower_theorem_lhs) << ','
        << fmt(b.lower_theorem_rhs) << '\n';
  }
}

inline json report_json(const RunResult& r) {
  const RunConfig& c = r.config;
  json rows = json::array();
  for (const ReportRow& row : r.report.rows)
    rows.push_back({{"i", row.index},
                    {"lambda_ref", num(row.lambda_ref)},
                    {"lambda_dg", num(row.lambda_dg)},
                    {"err_lambda", num(row.err_lambda)},
                    {"err_energy", num(row.err_energy)},
                    {"eta", num(row.eta)},
                    {"xi", num(row.xi)},
                    {"hot_ub", num(row.hot_ub)},
                    {"hot_lb", num(row.hot_lb)},
                    {"C_eta", num(row.c_eta)},
                    {"C_xi", num(row.c_xi)},
                    {"Clam_eta", num(row.clam_eta)},
                    {"Clam_xi", num(row.clam_xi)},
                    {"zero_error", row.zero_error},
                    {"upper_violation", row.upper_violation},
                    {"lower_violation", row.lower_violation}});
  json bounds = json::array();
  for (const EigenvalueBounds& b : r.bounds)
    bounds.push_back({{"upper_eta2", num(b.upper)},
                      {"lower_xi2", num(b.lower)},
                      {"upper_theorem", num(b.upper_theorem)},
                      {"upper_theorem_stated", num(b.upper_theorem_stated)},
                      {"lower_theorem_lhs", num(b.lower_theorem_lhs)},
                      {"lower_theorem_rhs", num(b.lower_theorem_rhs)}});
  return {
      {"metadata",
       {{"name", c.name},
        {"config_hash", config_hash(c)},
        {"N", r.n},
        {"dim", c.dim},
        {"element_counts", c.counts},
        {"basis_sizes", r.basis.sizes()},
        {"eigenpairs", c.eigenpairs},
        {"quadrature_order", c.quadrature_order},
        {"fine_degree", r.constants.fine_degree},
        {"alb_wavecount", c.alb_wavecount},
        {"reference_wavecount", c.reference_wavecount},
        {"has_reference", r.report.has_reference},
        {"potential_minimum", r.grid_potential.minimum},
        {"runtimes_s",
         {{"basis", r.timings.basis},
          {"constants", r.timings.constants},
          {"solve", r.timings.solve},
          {"estimators", r.timings.estimators},
          {"reference", r.timings.reference},
          {"total", r.timings.total}}}}},
      {"violation", r.report.any_violation()},
      {"rows", rows},
      {"eigenvalue_bounds", bounds},
  };
}

/// Whitespace table per pair index for log-scale plots.
inline void write_plot_errors(std::ostream& out, const EffectivityReport& rep) {
  out << "# i err_lambda err_energy eta xi hot_ub hot_lb\n";
  for (const ReportRow& r : rep.rows)
    out << r.index << ' ' << fmt(r.err_lambda) << ' ' << fmt(r.err_energy) << ' ' << fmt(r.eta)
        << ' ' << fmt(r.xi) << ' ' << fmt(r.hot_ub) << ' ' << fmt(r.hot_lb) << '\n';
}

/// Potential, first eigenfunction and its pointwise error at every element node.
inline void write_plot_fields(std::ostream& out, const RunResult& r) {
  const int d = r.mesh.dim();
  out << "#";
  for (int j = 0; j < d; ++j) out << " x" << j;
  out << " V u_1N" << (r.aligned ? " u_1 u_1-u_1N" : "") << '\n';
  const GridFunction& un = r.aligned ? *r.aligned : r.solution.fields;
  for (std::size_t e = 0; e < r.mesh.size(); ++e) {
    const ElementGrid& g = r.quad.element(e);
    for (Eigen::Index p = 0; p < g.points.rows(); ++p) {
      for (int j = 0; j < d; ++j) out << fmt(g.points(p, j)) << ' ';
      const double u_n = un.elements[e].interior.value(p, 0);
      out << fmt(r.grid_potential.value[e](p)) << ' ' << fmt(u_n);
      if (r.reference) {
        const double u = r.reference->fields.elements[e].interior.value(p, 0);
        out << ' ' << fmt(u) << ' ' << fmt(u - u_n);
      }
      out << '\n';
    }
  }
}

inline void write_reference_csv(std::ostream& out, const Eigen::VectorXd& lambda) {
  out << "i,lambda\n";
  for (Eigen::Index i = 0; i < lambda.size(); ++i) out << i + 1 << ',' << fmt(lambda(i)) << '\n';
}

/// Per-N rows of a convergence sweep.
inline void write_sweep_summary(std::ostream& out, const std::vector<RunResult>& runs) {
  out << "N,i,err_lambda,err_energy,eta,xi,hot_ub_over_eta,hot_lb_over_xi,C_eta,C_xi\n";
  for (const RunResult& r : runs)
    for (const ReportRow& row : r.report.rows) {
      const double ub = row.eta > 0.0 ? row.hot_ub / row.eta : NAN;
      const double lb = row.xi > 0.0 ? row.hot_lb / row.xi : NAN;
      out << r.n << ',' << row.index << ',' << fmt(row.err_lambda) << ',' << fmt(row.err_energy)
          << ',' << fmt(row.eta) << ',' << fmt(row.xi) << ',' << fmt(ub) << ',' << fmt(lb) << ','
          << fmt(row.c_eta) << ',' << fmt(row.c_xi) << '\n';
    }
}

namespace detail {
inline json matrix_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows) {
  const Eigen::Index r = j.at("rows").get<Eigen::Index>();
  const Eigen::Index c = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (r != rows || static_cast<Eigen::Index>(data.size()) != r * c)
    throw std::runtime_error("basis file: sample block has the wrong shape");
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), r, c);
}

inline json samples_json(const Samples& s) {
  json j = {{"value", matrix_json(s.value)}, {"gradient", json::array()}};
  for (const auto& g : s.gradient) j["gradient"].push_back(matrix_json(g));
  if (s.has_laplacian()) j["laplacian"] = matrix_json(s.laplacian);
  if (s.has_grad_laplacian()) {
    j["grad_laplacian"] = json::array();
    for (const auto& g : s.grad_laplacian) j["grad_laplacian"].push_back(matrix_json(g));
  }
  return j;
}

inline Samples samples_from_json(const json& j, Eigen::Index rows) {
  Samples s;
  s.value = matrix_from_json(j.at("value"), rows);
  for (const auto& g : j.at("gradient")) s.gradient.push_back(matrix_from_json(g, rows));
  if (j.contains("laplacian")) s.laplacian = matrix_from_json(j["laplacian"], rows);
  if (j.contains("grad_laplacian"))
    for (const auto& g : j["grad_laplacian"]) s.grad_laplacian.push_back(matrix_from_json(g, rows));
  return s;
}
}  // namespace detail

inline constexpr const char* kBasisFormat = "eigbound-basis/1";

/// Writes the node samples and face traces of every element basis.
inline void save_basis(std::ostream& out, const BasisSet& basis, const RunConfig& cfg, int n) {
  json j = {{"format", kBasisFormat},
            {"dim", cfg.dim},
            {"lengths", cfg.lengths},
            {"counts", cfg.counts},
            {"quadrature_order", cfg.quadrature_order},
            {"N", n},
            {"elements", json::array()}};
  for (std::size_t e = 0; e < basis.elements.size(); ++e) {
    const ElementBasis& b = basis.elements[e];
    json ej = {{"id", e}, {"functions", b.size()}, {"interior", detail::samples_json(b.field.interior)},
               {"faces", json::array()}};
    for (const Samples& f : b.field.faces) ej["faces"].push_back(detail::samples_json(f));
    j["elements"].push_back(std::move(ej));
  }
  out << j.dump() << '\n';
}

/// Reads a basis written by save_basis for the mesh and quadrature of `cfg`.
inline BasisSet load_basis(std::istream& in, const RunConfig& cfg) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("basis file: ") + e.what());
  }
  if (j.value("format", "") != kBasisFormat)
    throw std::runtime_error("basis file: unknown format (expected " + std::string(kBasisFormat) + ")");
  if (j.at("dim").get<int>() != cfg.dim || j.at("counts").get<std::vector<int>>() != cfg.counts ||
      j.at("quadrature_order").get<int>() != cfg.quadrature_order)
    throw std::runtime_error("basis file: mesh or quadrature order differs from the configuration");
  const auto lengths = j.at("lengths").get<std::vector<double>>();
  for (std::size_t k = 0; k < lengths.size(); ++k)
    if (std::abs(lengths[k] - cfg.lengths.at(k)) > 1e-12 * cfg.lengths[k])
      throw std::runtime_error("basis file: domain lengths differ from the configuration");

  const Partition mesh = Partition::build(cfg.dim, cfg.lengths, cfg.counts);
  const QuadGrid quad = QuadGrid::build(mesh, cfg.quadrature_order);
  const auto& list = j.at("elements");
  if (list.size() != mesh.size()) throw std::runtime_error("basis file: element count mismatch");
  BasisSet basis;
  basis.elements.resize(mesh.size());
  for (const auto& ej : list) {
    const std::size_t e = ej.at("id").get<std::size_t>();
    if (e >= mesh.size()) throw std::runtime_error("basis file: element id out of range");
    const ElementGrid& g = quad.element(e);
    ElementField field;
    field.interior = detail::samples_from_json(ej.at("interior"), g.points.rows());
    const auto& faces = ej.at("faces");
    if (faces.size() != g.face_points.size())
      throw std::runtime_error("basis file: face count mismatch");
    for (std::size_t lf = 0; lf < faces.size(); ++lf)
      field.faces.push_back(detail::samples_from_json(faces[lf], g.face_points[lf].rows()));
    Sampler values = nodal_sampler(mesh.element(e).box, quad.rule().nodes, field.interior.value);
    basis.elements[e] = ElementBasis::from_field(g, std::move(field), std::move(values));
  }
  basis.finalize();
  return basis;
}

/// Writes a file, creating parent directories.
template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  writer(out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// All result files of one run under `dir`.
inline std::vector<std::filesystem::path> write_run(const std::filesystem::path& dir, const RunResult& r) {
  std::vector<std::filesystem::path> files;
  auto emit = [&](const std::string& name, auto&& writer) {
    write_file(dir / name, writer);
    files.push_back(dir / name);
  };
  emit("config.json", [&](std::ostream& o) { o << config_to_json(r.config).dump(2) << '\n'; });
  emit("constants.csv", [&](std::ostream& o) { write_constants_csv(o, r.constants); });
  emit("estimators.csv", [&](std::ostream& o) { write_estimators_csv(o, r.bundle); });
  emit("estimators.json", [&](std::ostream& o) { o << estimators_json(r.bundle).dump(2) << '\n'; });
  emit("report.csv", [&](std::ostream& o) { write_report_csv(o, r.report); });
  emit("report.json", [&](std::ostream& o) { o << report_json(r).dump(2) << '\n'; });
  emit("bounds.csv", [&](std::ostream& o) { write_bounds_csv(o, r); });
  emit("plot_errors.dat", [&](std::ostream& o) { write_plot_errors(o, r.report); });
  emit("plot_fields.dat", [&](std::ostream& o) { write_plot_fields(o, r); });
  if (r.diagnostics) {
    emit("diagnostics_estimators.csv", [&](std::ostream& o) { write_estimators_csv(o, *r.diagnostics); });
    emit("diagnostics_report.csv", [&](std::ostream& o) {
      write_report_csv(o, build_report(*r.diagnostics, &r.errors));
    });
  }
  return files;
}

}  // namespace eigbound
