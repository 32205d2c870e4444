#pragma once

// Symmetric/nonsymmetric interior penalty DG discretization over a broken
// basis, the discrete eigenproblem, and the broken energy norm.

#include "eigbound/basis.hpp"
#include "eigbound/constants.hpp"
#include "eigbound/fields.hpp"
#include "eigbound/linalg.hpp"
#include "eigbound/mesh.hpp"
#include "eigbound/parallel.hpp"
#include "eigbound/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigbound {

struct DiscreteOperator {
  Eigen::MatrixXd stiffness;  // a(phi_i, phi_j)
  Eigen::MatrixXd mass;       // (phi_i, phi_j)_Omega
  std::vector<Eigen::Index> offsets;
  std::vector<Eigen::Index> sizes;
  double theta = 1.0;

  Eigen::Index dofs() const { return stiffness.rows(); }
};

/// Assembles a(., .) with the potential taken unshifted. Face terms are
/// visited once from each side of every face (the 1/2 sum over element
/// boundaries).
inline DiscreteOperator assemble(const Partition& mesh, const QuadGrid& quad, const BasisSet& basis,
                                 const GridPotential& v, const LocalConstants& k) {
  const std::size_t ne = mesh.size();
  const int d = mesh.dim();
  DiscreteOperator op;
  op.theta = k.theta;
  op.offsets = basis.offsets;
  op.sizes = basis.sizes();
  const Eigen::Index n = basis.total();
  op.stiffness = Eigen::MatrixXd::Zero(n, n);
  op.mass = Eigen::MatrixXd::Zero(n, n);

  struct Local {
    Eigen::MatrixXd volume, mass;
    std::vector<Eigen::MatrixXd> faces;  // (N_e + N_n) square, per local face
  };
  std::vector<Local> local(ne);
  parallel_for(ne, [&](std::size_t e) {
    const ElementBasis& be = basis.elements[e];
    const ElementGrid& g = quad.element(e);
    const Samples& s = be.field.interior;
    if (!s.has_gradient()) throw std::invalid_argument("assemble: basis gradients missing");
    Local& out = local[e];
    out.mass = s.value.transpose() * g.weights.asDiagonal() * s.value;
    out.volume = s.value.transpose() * (g.weights.array() * v.value[e].array()).matrix().asDiagonal() *
                 s.value;
    for (int j = 0; j < d; ++j)
      out.volume += s.gradient[j].transpose() * g.weights.asDiagonal() * s.gradient[j];
    for (int lf = 0; lf < 2 * d; ++lf) {
      const std::size_t nb = mesh.element(e).neighbors[lf];
      const ElementBasis& bn = basis.elements[nb];
      const Samples& te = be.field.faces.at(lf);
      const Samples& tn = bn.field.faces.at(opposite_face(lf));
      if (!te.has_gradient()) throw std::invalid_argument("assemble: basis traces missing");
      const Eigen::Index ke = be.size();
      const Eigen::Index kn = bn.size();
      const Eigen::Index nodes = te.points();
      Eigen::MatrixXd jump(nodes, ke + kn);  // phi|_e - phi|_n, seen from e
      jump << te.value, -tn.value;
      Eigen::MatrixXd dn = Eigen::MatrixXd::Zero(nodes, ke + kn);  // normal derivative inside e
      dn.leftCols(ke) = outward_sign(lf) * te.gradient[face_axis(lf)];
      const auto w = g.face_weights[lf].asDiagonal();
      const Eigen::MatrixXd dj = dn.transpose() * w * jump;
      out.faces.push_back(0.5 * (-dj - k.theta * dj.transpose() +
                                 k.gamma(e) * jump.transpose() * w * jump));
    }
  });

  for (std::size_t e = 0; e < ne; ++e) {
    const Eigen::Index oe = basis.offsets[e];
    const Eigen::Index ke = basis.elements[e].size();
    op.stiffness.block(oe, oe, ke, ke) += local[e].volume;
    op.mass.block(oe, oe, ke, ke) += local[e].mass;
    for (int lf = 0; lf < 2 * d; ++lf) {
      const std::size_t nb = mesh.element(e).neighbors[lf];
      const Eigen::Index on = basis.offsets[nb];
      const Eigen::Index kn = basis.elements[nb].size();
      const Eigen::MatrixXd& f = local[e].faces[lf];
      op.stiffness.block(oe, oe, ke, ke) += f.topLeftCorner(ke, ke);
      op.stiffness.block(oe, on, ke, kn) += f.topRightCorner(ke, kn);
      op.stiffness.block(on, oe, kn, ke) += f.bottomLeftCorner(kn, ke);
      op.stiffness.block(on, on, kn, kn) += f.bottomRightCorner(kn, kn);
    }
  }
  if (!op.stiffness.allFinite() || !op.mass.allFinite())
    throw NumericalError("assemble: non-finite matrix entries");
  return op;
}

struct EigenSolution {
  Eigen::VectorXd eigenvalues;  // ascending
  Eigen::MatrixXd coeffs;       // mass-orthonormal columns
  GridFunction fields;          // u_{i,N} sampled up to the gradient of the Laplacian
};

/// The m lowest eigenpairs of A c = lambda M c.
inline EigenSolution solve_eig(const DiscreteOperator& op, const BasisSet& basis, Eigen::Index m) {
  if (m < 1 || m > op.dofs())
    throw std::invalid_argument("solve_eig: requested " + std::to_string(m) +
                                " eigenpairs but the discrete space has " +
                                std::to_string(op.dofs()) + " degrees of freedom");
  const linalg::SymmetricEigen eig = linalg::lowest_generalized_eigenpairs(op.stiffness, op.mass, m);
  EigenSolution sol;
  sol.eigenvalues = eig.values;
  sol.coeffs = eig.vectors;
  // Fix the sign so that the largest-magnitude coefficient is positive (deterministic output).
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index arg = 0;
    sol.coeffs.col(i).cwiseAbs().maxCoeff(&arg);
    if (sol.coeffs(arg, i) < 0.0) sol.coeffs.col(i) *= -1.0;
  }
  sol.fields = basis.expand(sol.coeffs);
  return sol;
}

/// Per-element squared contributions to the broken energy norm, with the
/// potential shifted to V - V_m.
inline Eigen::VectorXd energy_norm_squares(const GridFunction& f, const Partition& mesh,
                                           const QuadGrid& quad, const LocalConstants& k,
                                           const GridPotential& v, Eigen::Index col = 0) {
  Eigen::VectorXd out(mesh.size());
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const Samples& s = f.elements.at(e).interior;
    if (!s.has_gradient()) throw std::invalid_argument("energy norm: gradient samples missing");
    const ElementGrid& g = quad.element(e);
    double sum = 0.0;
    for (int j = 0; j < mesh.dim(); ++j)
      sum += (s.gradient[j].col(col).array().square() * g.weights.array()).sum();
    sum += (s.value.col(col).array().square() * (v.value[e].array() - v.minimum) * g.weights.array())
               .sum();
    for (int lf = 0; lf < mesh.faces_per_element(); ++lf) {
      const Eigen::VectorXd jmp = jump_from(f, mesh, e, lf, col);
      sum += 0.5 * k.gamma(e) * (jmp.array().square() * g.face_weights[lf].array()).sum();
    }
    out(e) = sum;
  }
  return out;
}

inline double energy_norm(const GridFunction& f, const Partition& mesh, const QuadGrid& quad,
                          const LocalConstants& k, const GridPotential& v, Eigen::Index col = 0) {
  return std::sqrt(std::max(0.0, energy_norm_squares(f, mesh, quad, k, v, col).sum()));
}

/// a(w, v) for arbitrary broken fields carrying gradients and traces; the
/// potential enters as V - shift.
inline double evaluate_bilinear(const GridFunction& w, const GridFunction& v, const Partition& mesh,
                                const QuadGrid& quad, const LocalConstants& k,
                                const GridPotential& pot, double shift = 0.0, Eigen::Index cw = 0,
                                Eigen::Index cv = 0) {
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const Samples& sw = w.elements.at(e).interior;
    const Samples& sv = v.elements.at(e).interior;
    if (!sw.has_gradient() || !sv.has_gradient())
      throw std::invalid_argument("bilinear form: gradient samples missing");
    const ElementGrid& g = quad.element(e);
    for (int j = 0; j < mesh.dim(); ++j)
      sum += (sw.gradient[j].col(cw).array() * sv.gradient[j].col(cv).array() * g.weights.array()).sum();
    sum += (sw.value.col(cw).array() * sv.value.col(cv).array() * (pot.value[e].array() - shift) *
            g.weights.array())
               .sum();
    for (int lf = 0; lf < mesh.faces_per_element(); ++lf) {
      const auto& fw = g.face_weights[lf].array();
      const int axis = face_axis(lf);
      const Eigen::VectorXd jw = jump_from(w, mesh, e, lf, cw);
      const Eigen::VectorXd jv = jump_from(v, mesh, e, lf, cv);
      const Eigen::VectorXd dw = outward_sign(lf) * w.elements[e].faces[lf].gradient[axis].col(cw);
      const Eigen::VectorXd dv = outward_sign(lf) * v.elements[e].faces[lf].gradient[axis].col(cv);
      sum += 0.5 * ((-dw.array() * jv.array() - k.theta * jw.array() * dv.array() +
                     k.gamma(e) * jw.array() * jv.array()) *
                    fw)
                       .sum();
    }
  }
  return sum;
}

}  // namespace eigbound
