#pragma once
// Weighted quasi-interpolation from the fine space onto the coarse space:
// node values are local hat-weighted averages, boundary nodes stay zero.
// The operator, its kernel constraints on patches, and an empirical local
// stability measurement live here.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lod/fem.hpp"

namespace lod {

class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClementOperator {
  SparseMatrix interp;         // I: coarse dofs x fine dofs, rows W[j,:]/d[j]
  SparseMatrix weighted_mass;  // W[j,i] = integral hat_j^H hat_i^h
  Vector hat_volumes;          // d[j] = integral hat_j^H
  Eigen::MatrixXd coarse_gram;               // I restricted to coarse functions (via prolongation)
  Eigen::PartialPivLU<Eigen::MatrixXd> coarse_gram_lu;
  double coarse_gram_condition = 0.0;        // 1-norm condition number, recorded
};

inline ClementOperator build_clement(const FeSpace& coarse, const FeSpace& fine,
                                     const QuadratureRule& quad) {
  ClementOperator op;
  auto [w, d] = assemble_weighted_mass(coarse, fine, quad);
  for (int j = 0; j < d.size(); ++j)
    if (!(d[j] > 0.0))
      throw std::runtime_error("build_clement: nonpositive hat volume at coarse dof " + std::to_string(j));
  op.weighted_mass = std::move(w);
  op.hat_volumes = std::move(d);
  op.interp = op.hat_volumes.cwiseInverse().asDiagonal() * op.weighted_mass;
  op.interp.makeCompressed();

  const SparseMatrix p = prolongation(coarse, fine);
  op.coarse_gram = Eigen::MatrixXd(op.interp * p);
  op.coarse_gram_lu.compute(op.coarse_gram);
  const Eigen::MatrixXd inverse = op.coarse_gram_lu.inverse();
  const double norm1 = op.coarse_gram.cwiseAbs().colwise().sum().maxCoeff();
  const double inv_norm1 = inverse.cwiseAbs().colwise().sum().maxCoeff();
  op.coarse_gram_condition = norm1 * inv_norm1;
  if (!std::isfinite(op.coarse_gram_condition))
    throw std::runtime_error("build_clement: interpolation is singular on the coarse space");
  return op;
}

// Rows of the interpolation operator restricted to a patch: coarse nodes
// whose hat meets the patch interior, columns ordered like
// patch.interior_fine_vertices.  Rows that vanish after restriction are
// dropped; a rank-deficient result signals that the patch is too small and
// must be enlarged.
struct ConstraintBlock {
  SparseMatrix rows;            // num kept coarse nodes x patch interior dofs
  std::vector<int> coarse_dofs;
};

inline ConstraintBlock kernel_constraint_rows(const ClementOperator& op, const Patch& patch,
                                              const FeSpace& coarse, const FeSpace& fine) {
  std::vector<int> local_col(fine.dim(), -1);
  const int p = static_cast<int>(patch.interior_fine_vertices.size());
  for (int c = 0; c < p; ++c) {
    const int dof = fine.dof_of_vertex(patch.interior_fine_vertices[c]);
    if (dof < 0) throw std::invalid_argument("kernel_constraint_rows: patch interior vertex on the boundary");
    local_col[dof] = c;
  }
  std::vector<int> row_of_dof(coarse.dim(), -1);
  std::vector<int> candidate_dofs;
  for (int cv : patch.coarse_nodes_touching) {
    const int dof = coarse.dof_of_vertex(cv);
    if (dof < 0) continue;
    row_of_dof[dof] = 0;  // mark; real row index assigned after zero-row drop
    candidate_dofs.push_back(dof);
  }

  // Collect restricted entries per candidate row.
  std::vector<std::vector<std::pair<int, double>>> entries(candidate_dofs.size());
  std::vector<int> candidate_index(coarse.dim(), -1);
  for (size_t r = 0; r < candidate_dofs.size(); ++r) candidate_index[candidate_dofs[r]] = static_cast<int>(r);
  for (int c = 0; c < p; ++c) {
    const int dof = fine.dof_of_vertex(patch.interior_fine_vertices[c]);
    for (SparseMatrix::InnerIterator it(op.interp, dof); it; ++it) {
      const int r = candidate_index[static_cast<int>(it.row())];
      if (r >= 0 && it.value() != 0.0) entries[r].emplace_back(c, it.value());
    }
  }

  ConstraintBlock block;
  std::vector<Triplet> triplets;
  for (size_t r = 0; r < candidate_dofs.size(); ++r) {
    if (entries[r].empty()) continue;  // vanished under restriction
    const int row = static_cast<int>(block.coarse_dofs.size());
    block.coarse_dofs.push_back(candidate_dofs[r]);
    for (const auto& [c, v] : entries[r]) triplets.emplace_back(row, c, v);
  }
  block.rows.resize(static_cast<int>(block.coarse_dofs.size()), p);
  block.rows.setFromTriplets(triplets.begin(), triplets.end());
  block.rows.makeCompressed();

  if (block.rows.rows() > 0) {
    const SparseMatrix gram = SparseMatrix(block.rows * block.rows.transpose());
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(gram);
    bool deficient = ldlt.info() != Eigen::Success;
    if (!deficient) {
      const Vector dvec = ldlt.vectorD();
      deficient = dvec.minCoeff() <= 1e-12 * dvec.maxCoeff();
    }
    if (deficient)
      throw RankDeficiencyError(
          "kernel_constraint_rows: constraints are rank deficient; enlarge the patch");
  }
  return block;
}

// Empirical local stability of the interpolation (lifted back to the fine
// space): per coarse element T the ratio
//   (diam(T)^-1 ||v - Q v||_{L2(T)} + |v - Q v|_{H1(T)}) / |v|_{H1(omega_T)}
// with omega_T the vertex neighbors of T.  Statistics are taken over a
// deterministic coordinate ramp plus seeded random nodal vectors.
struct StabilityStats {
  double max_ratio = 0.0;
  double ramp_ratio = 0.0;
};

inline StabilityStats measure_interpolation_stability(const FeSpace& coarse, const FeSpace& fine,
                                                      const ClementOperator& op, int trials,
                                                      unsigned seed) {
  const TriMesh& cm = coarse.mesh();
  const TriMesh& fm = fine.mesh();
  const SparseMatrix p = prolongation(coarse, fine);
  const std::vector<int> ancestor = fine_ancestors(cm, fm);
  const QuadratureRule quad = triangle_gauss3(1);

  // Coarse elements sharing a vertex with T.
  std::vector<std::vector<int>> neighbors(cm.num_triangles());
  for (int t = 0; t < cm.num_triangles(); ++t) {
    std::vector<char> seen(cm.num_triangles(), 0);
    for (int v : cm.triangles[t])
      for (int s : cm.vertex_star[v])
        if (!seen[s]) {
          seen[s] = 1;
          neighbors[t].push_back(s);
        }
  }

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const double inv_diam = 1.0 / cm.element_diameter();

  StabilityStats stats;
  for (int trial = 0; trial <= trials; ++trial) {
    Vector v(fine.dim());
    if (trial == 0) {
      for (int i = 0; i < fine.dim(); ++i) v[i] = fm.vertices[fine.vertex_of_dof(i)].x();
    } else {
      for (int i = 0; i < fine.dim(); ++i) v[i] = uni(rng);
    }
    const Vector lifted = p * (op.interp * v);
    const Vector r = v - lifted;

    Vector l2_T = Vector::Zero(cm.num_triangles());
    Vector h1_T = Vector::Zero(cm.num_triangles());
    Vector h1v_T = Vector::Zero(cm.num_triangles());
    for (int t = 0; t < fm.num_triangles(); ++t) {
      const auto& geom = fine.geometry(t);
      const int a = ancestor[t];
      const Eigen::Vector3d rv = fine.local_values(t, r);
      for (const auto& q : quad.nodes) {
        const double u = q.b0 * rv[0] + q.b1 * rv[1] + q.b2 * rv[2];
        l2_T[a] += 2.0 * geom.area * q.w * u * u;
      }
      h1_T[a] += geom.area * (geom.grad * rv).squaredNorm();
      h1v_T[a] += geom.area * (geom.grad * fine.local_values(t, v)).squaredNorm();
    }

    const double global_h1 = std::sqrt(h1v_T.sum());
    for (int t = 0; t < cm.num_triangles(); ++t) {
      double denom2 = 0.0;
      for (int s : neighbors[t]) denom2 += h1v_T[s];
      const double denom = std::sqrt(denom2);
      if (denom < 1e-14 * global_h1) continue;
      const double ratio = (inv_diam * std::sqrt(l2_T[t]) + std::sqrt(h1_T[t])) / denom;
      stats.max_ratio = std::max(stats.max_ratio, ratio);
      if (trial == 0) stats.ramp_ratio = std::max(stats.ramp_ratio, ratio);
    }
  }
  return stats;
}

}  // namespace lod
