#pragma once

// Subspace alignment of discrete eigenfunctions against a reference, error
// measurement and effectivity indices.

#include "eigbound/constants.hpp"
#include "eigbound/dg.hpp"
#include "eigbound/estimators.hpp"
#include "eigbound/fields.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace eigbound {

/// Groups of consecutive indices whose eigenvalues agree to rel_tol * max(1, |lambda|).
inline std::vector<std::vector<Eigen::Index>> degenerate_groups(const Eigen::VectorXd& lambda,
                                                                double rel_tol = 1e-8) {
  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!groups.empty()) {
      const Eigen::Index prev = groups.back().back();
      if (std::abs(lambda(i) - lambda(prev)) <= rel_tol * std::max(1.0, std::abs(lambda(i)))) {
        groups.back().push_back(i);
        continue;
      }
    }
    groups.push_back({i});
  }
  return groups;
}

/// The alignment matrix S with U_N S = aligned U_N: S = U_N^T W U restricted
/// to the diagonal blocks given by `groups` (all pairs in one group if empty).
inline Eigen::MatrixXd alignment_matrix(const Eigen::MatrixXd& overlap,
                                        const std::vector<std::vector<Eigen::Index>>& groups = {}) {
  if (groups.empty()) return overlap;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(overlap.rows(), overlap.cols());
  for (const auto& g : groups)
    for (Eigen::Index i : g)
      for (Eigen::Index j : g) s(i, j) = overlap(i, j);
  return s;
}

/// U_N (U_N^T W U) on sampled vectors.
inline Eigen::MatrixXd align(const Eigen::MatrixXd& un, const Eigen::MatrixXd& u,
                             const Eigen::VectorXd& w,
                             const std::vector<std::vector<Eigen::Index>>& groups = {}) {
  if (un.rows() != u.rows() || un.rows() != w.size() || un.cols() != u.cols())
    throw std::invalid_argument("align: dimension mismatch");
  return un * alignment_matrix(un.transpose() * w.asDiagonal() * u, groups);
}

/// (f_i, g_j)_Omega for all column pairs.
inline Eigen::MatrixXd overlap(const GridFunction& f, const GridFunction& g, const QuadGrid& quad) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(f.cols(), g.cols());
  for (std::size_t e = 0; e < quad.size(); ++e)
    s += f.elements[e].interior.value.transpose() * quad.element(e).weights.asDiagonal() *
         g.elements[e].interior.value;
  return s;
}

/// Aligned discrete eigenfunctions, renormalized to unit L2 norm.
inline GridFunction align_fields(const GridFunction& un, const GridFunction& u, const QuadGrid& quad,
                                 const std::vector<std::vector<Eigen::Index>>& groups) {
  Eigen::MatrixXd s = alignment_matrix(overlap(un, u, quad), groups);
  const Eigen::MatrixXd gram = overlap(un, un, quad);
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const double n2 = s.col(j).dot(gram * s.col(j));
    if (n2 > 0.0) s.col(j) /= std::sqrt(n2);
  }
  return un.combine(s);
}

struct PairError {
  double lambda_ref = 0.0;
  double lambda_n = 0.0;
  double err_lambda = 0.0;
  double err_energy = 0.0;
  double err_l2 = 0.0;
  Eigen::VectorXd local_energy_sq;  // per-element squares of the energy norm of the error
};

inline std::vector<PairError> measure_errors(const GridFunction& aligned, const Eigen::VectorXd& lambda_n,
                                             const GridFunction& u_ref, const Eigen::VectorXd& lambda_ref,
                                             const Partition& mesh, const QuadGrid& quad,
                                             const LocalConstants& k, const GridPotential& v) {
  std::vector<PairError> out;
  const GridFunction diff = lincomb(1.0, u_ref, -1.0, aligned);
  for (Eigen::Index i = 0; i < lambda_n.size(); ++i) {
    PairError pe;
    pe.lambda_ref = lambda_ref(i);
    pe.lambda_n = lambda_n(i);
    pe.err_lambda = std::abs(lambda_ref(i) - lambda_n(i));
    pe.local_energy_sq = energy_norm_squares(diff, mesh, quad, k, v, i);
    pe.err_energy = std::sqrt(std::max(0.0, pe.local_energy_sq.sum()));
    pe.err_l2 = l2_norm(diff, quad, i);
    out.push_back(std::move(pe));
  }
  return out;
}

struct ReportRow {
  int index = 0;  // 1-based
  double lambda_ref = std::numeric_limits<double>::quiet_NaN();
  double lambda_dg = 0.0;
  double err_lambda = std::numeric_limits<double>::quiet_NaN();
  double err_energy = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;
  double xi = 0.0;
  double hot_ub = std::numeric_limits<double>::quiet_NaN();
  double hot_lb = std::numeric_limits<double>::quiet_NaN();
  double c_eta = std::numeric_limits<double>::quiet_NaN();
  double c_xi = std::numeric_limits<double>::quiet_NaN();
  double clam_eta = std::numeric_limits<double>::quiet_NaN();
  double clam_xi = std::numeric_limits<double>::quiet_NaN();
  bool zero_error = false;      // ratios omitted
  bool upper_violation = false; // C_eta < 1
  bool lower_violation = false; // C_xi > 1
};

struct EffectivityReport {
  std::vector<ReportRow> rows;
  bool has_reference = false;

  bool any_violation() const {
    for (const auto& r : rows)
      if (r.upper_violation || r.lower_violation) return true;
    return false;
  }
};

inline EffectivityReport build_report(const EstimatorBundle& bundle,
                                      const std::vector<PairError>* errors = nullptr) {
  EffectivityReport rep;
  rep.has_reference = errors != nullptr;
  for (std::size_t i = 0; i < bundle.pairs.size(); ++i) {
    const PairEstimate& pe = bundle.pairs[i];
    ReportRow row;
    row.index = static_cast<int>(i) + 1;
    row.lambda_dg = pe.lambda_n;
    row.eta = pe.eta;
    row.xi = pe.xi;
    if (errors) {
      const PairError& er = errors->at(i);
      row.lambda_ref = er.lambda_ref;
      row.err_lambda = er.err_lambda;
      row.err_energy = er.err_energy;
      row.hot_ub = pe.hot_ub;
      row.hot_lb = pe.hot_lb;
      row.zero_error = !(er.err_energy > 0.0) || !(er.err_lambda > 0.0);
      if (er.err_energy > 0.0) {
        row.c_eta = pe.eta / er.err_energy;
        row.c_xi = pe.xi / er.err_energy;
        row.upper_violation = row.c_eta < 1.0;
        row.lower_violation = row.c_xi > 1.0;
      }
      if (er.err_lambda > 0.0) {
        row.clam_eta = pe.eta * pe.eta / er.err_lambda;
        row.clam_xi = pe.xi * pe.xi / er.err_lambda;
      }
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace eigbound
