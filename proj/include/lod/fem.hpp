#pragma once
// Piecewise-linear finite elements on the structured triangulations, with
// homogeneous Dirichlet data eliminated: degrees of freedom are the interior
// vertices.  Assembly routines cover weighted stiffness, mass, loads, the
// coarse-hat weighted mass pairing, nodal interpolation between nested
// spaces, and the norms used for error reporting.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lod/mesh.hpp"
#include "lod/quadrature.hpp"

namespace lod {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;
using MatrixField = std::function<Eigen::Matrix2d(const Eigen::Vector2d&)>;
using ScalarField = std::function<double(const Eigen::Vector2d&)>;

class FeSpace {
 public:
  explicit FeSpace(std::shared_ptr<const TriMesh> mesh) : mesh_(std::move(mesh)) {
    if (!mesh_) throw std::invalid_argument("FeSpace: null mesh");
    const TriMesh& m = *mesh_;
    dof_of_vertex_.assign(m.num_vertices(), -1);
    for (int v = 0; v < m.num_vertices(); ++v) {
      if (m.vertex_on_boundary[v]) continue;
      dof_of_vertex_[v] = static_cast<int>(vertex_of_dof_.size());
      vertex_of_dof_.push_back(v);
    }
    geometry_.resize(m.num_triangles());
    for (int t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangles[t];
      ElementGeometry& g = geometry_[t];
      g.area = m.triangle_area(t);
      if (!(g.area > 0.0)) throw std::invalid_argument("FeSpace: non-positive triangle area");
      for (int a = 0; a < 3; ++a) {
        // grad of the hat at local vertex a: rotate the opposite edge by 90
        // degrees and scale by 1/(2*area).
        const Eigen::Vector2d e = m.vertices[tri[(a + 2) % 3]] - m.vertices[tri[(a + 1) % 3]];
        g.grad.col(a) = Eigen::Vector2d(-e.y(), e.x()) / (2.0 * g.area);
      }
    }
  }

  const TriMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const TriMesh> mesh_ptr() const { return mesh_; }
  int dim() const { return static_cast<int>(vertex_of_dof_.size()); }
  int dof_of_vertex(int v) const { return dof_of_vertex_[v]; }
  int vertex_of_dof(int d) const { return vertex_of_dof_[d]; }

  struct ElementGeometry {
    Eigen::Matrix<double, 2, 3> grad;  // hat gradients, one column per local vertex
    double area = 0.0;
  };
  const ElementGeometry& geometry(int t) const { return geometry_[t]; }

  // Nodal values of the coefficient vector on a triangle (0 on the boundary).
  Eigen::Vector3d local_values(int t, const Vector& coeffs) const {
    const auto& tri = mesh_->triangles[t];
    Eigen::Vector3d vals;
    for (int a = 0; a < 3; ++a) {
      const int dof = dof_of_vertex_[tri[a]];
      vals[a] = dof >= 0 ? coeffs[dof] : 0.0;
    }
    return vals;
  }

 private:
  std::shared_ptr<const TriMesh> mesh_;
  std::vector<int> dof_of_vertex_;
  std::vector<int> vertex_of_dof_;
  std::vector<ElementGeometry> geometry_;
};

namespace detail {

inline Eigen::Vector2d quadrature_point(const TriMesh& mesh, int t, const QuadratureRule::Node& q) {
  const auto& tri = mesh.triangles[t];
  return q.b0 * mesh.vertices[tri[0]] + q.b1 * mesh.vertices[tri[1]] + q.b2 * mesh.vertices[tri[2]];
}

inline void check_spd(const Eigen::Matrix2d& a, const Eigen::Vector2d& x) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || std::abs(a(0, 1) - a(1, 0)) > 1e-12 * scale || a(0, 0) <= 0.0 ||
      a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) <= 0.0) {
    throw std::runtime_error("assemble_stiffness: coefficient matrix is not symmetric positive definite at (" +
                             std::to_string(x.x()) + ", " + std::to_string(x.y()) + ")");
  }
}

}  // namespace detail

// Quadrature average of A over each element, scaled by the element area:
// Abar_T = 2*|T| * sum_q w_q A(x_q).  Each evaluation is checked for
// symmetric positive definiteness.
inline SparseMatrix assemble_stiffness(const FeSpace& space, const MatrixField& coefficient,
                                       const QuadratureRule& quad) {
  const TriMesh& mesh = space.mesh();
  std::vector<Triplet> triplets;
  triplets.reserve(9 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& geom = space.geometry(t);
    Eigen::Matrix2d abar = Eigen::Matrix2d::Zero();
    for (const auto& q : quad.nodes) {
      const Eigen::Vector2d x = detail::quadrature_point(mesh, t, q);
      const Eigen::Matrix2d a = coefficient(x);
      detail::check_spd(a, x);
      abar += q.w * a;
    }
    abar *= 2.0 * geom.area;
    Eigen::Matrix3d local;
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        local(a, b) = geom.grad.col(a).dot(abar * geom.grad.col(b));
        local(b, a) = local(a, b);
      }
    const auto& tri = mesh.triangles[t];
    for (int a = 0; a < 3; ++a) {
      const int ra = space.dof_of_vertex(tri[a]);
      if (ra < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int rb = space.dof_of_vertex(tri[b]);
        if (rb >= 0) triplets.emplace_back(ra, rb, local(a, b));
      }
    }
  }
  SparseMatrix matrix(space.dim(), space.dim());
  matrix.setFromTriplets(triplets.begin(), triplets.end());
  matrix.prune(0.0);
  matrix.makeCompressed();
  return matrix;
}

inline SparseMatrix assemble_mass(const FeSpace& space, const QuadratureRule& quad) {
  const TriMesh& mesh = space.mesh();
  std::vector<Triplet> triplets;
  triplets.reserve(9 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double scale = 2.0 * space.geometry(t).area;
    Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
    for (const auto& q : quad.nodes) {
      const Eigen::Vector3d b(q.b0, q.b1, q.b2);
      for (int a = 0; a < 3; ++a)
        for (int c = a; c < 3; ++c) local(a, c) += scale * q.w * b[a] * b[c];
    }
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < a; ++c) local(a, c) = local(c, a);
    const auto& tri = mesh.triangles[t];
    for (int a = 0; a < 3; ++a) {
      const int ra = space.dof_of_vertex(tri[a]);
      if (ra < 0) continue;
      for (int c = 0; c < 3; ++c) {
        const int rc = space.dof_of_vertex(tri[c]);
        if (rc >= 0) triplets.emplace_back(ra, rc, local(a, c));
      }
    }
  }
  SparseMatrix matrix(space.dim(), space.dim());
  matrix.setFromTriplets(triplets.begin(), triplets.end());
  matrix.makeCompressed();
  return matrix;
}

inline Vector assemble_load(const FeSpace& space, const ScalarField& g, const QuadratureRule& quad) {
  const TriMesh& mesh = space.mesh();
  Vector load = Vector::Zero(space.dim());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double scale = 2.0 * space.geometry(t).area;
    const auto& tri = mesh.triangles[t];
    for (const auto& q : quad.nodes) {
      const double value = scale * q.w * g(detail::quadrature_point(mesh, t, q));
      const double b[3] = {q.b0, q.b1, q.b2};
      for (int a = 0; a < 3; ++a) {
        const int dof = space.dof_of_vertex(tri[a]);
        if (dof >= 0) load[dof] += value * b[a];
      }
    }
  }
  return load;
}

// Pairings of coarse hats against fine hats, and the coarse hat volumes:
// W[j,i] = integral of hat_j^H * hat_i^h, d[j] = integral of hat_j^H.
// Integrands are quadratics, so any degree-2 rule is exact.
inline std::pair<SparseMatrix, Vector> assemble_weighted_mass(const FeSpace& coarse, const FeSpace& fine,
                                                              const QuadratureRule& quad) {
  const TriMesh& cm = coarse.mesh();
  const TriMesh& fm = fine.mesh();
  const std::vector<int> ancestor = fine_ancestors(cm, fm);
  std::vector<Triplet> triplets;
  triplets.reserve(9 * fm.num_triangles());
  Vector volumes = Vector::Zero(coarse.dim());
  for (int t = 0; t < fm.num_triangles(); ++t) {
    const double scale = 2.0 * fine.geometry(t).area;
    const auto& ftri = fm.triangles[t];
    const int anc = ancestor[t];
    const auto& ctri = cm.triangles[anc];
    const auto& cgeom = coarse.geometry(anc);
    const Eigen::Vector2d c0 = cm.vertices[ctri[0]];
    for (const auto& q : quad.nodes) {
      const Eigen::Vector2d x = detail::quadrature_point(fm, t, q);
      const double fb[3] = {q.b0, q.b1, q.b2};
      for (int a = 0; a < 3; ++a) {
        // Coarse hat value at x via its linear form on the ancestor triangle.
        const Eigen::Vector2d rel = x - c0;
        const double cval = (a == 0 ? 1.0 : 0.0) + cgeom.grad.col(a).dot(rel);
        const double contrib = scale * q.w * cval;
        const int row = coarse.dof_of_vertex(ctri[a]);
        if (row < 0) continue;
        volumes[row] += contrib;
        for (int c = 0; c < 3; ++c) {
          const int col = fine.dof_of_vertex(ftri[c]);
          if (col >= 0) triplets.emplace_back(row, col, contrib * fb[c]);
        }
      }
    }
  }
  SparseMatrix weighted(coarse.dim(), fine.dim());
  weighted.setFromTriplets(triplets.begin(), triplets.end());
  weighted.prune(0.0);
  weighted.makeCompressed();
  return {std::move(weighted), std::move(volumes)};
}

// Nodal interpolation of coarse functions into the fine space (fine dofs x
// coarse dofs).  Exact for nested structured meshes; entries are the coarse
// hat values at fine vertices.
inline SparseMatrix prolongation(const FeSpace& coarse, const FeSpace& fine) {
  const TriMesh& cm = coarse.mesh();
  const TriMesh& fm = fine.mesh();
  if (fm.n % cm.n != 0) throw std::invalid_argument("prolongation: meshes are not nested");
  const int ratio = fm.n / cm.n;
  std::vector<Triplet> triplets;
  triplets.reserve(3 * fine.dim());
  auto push = [&](int row, int ci, int cj, double weight) {
    if (weight == 0.0) return;
    const int col = coarse.dof_of_vertex(cm.vertex_index(ci, cj));
    if (col >= 0) triplets.emplace_back(row, col, weight);
  };
  for (int dof = 0; dof < fine.dim(); ++dof) {
    const int v = fine.vertex_of_dof(dof);
    const int fi = v % (fm.n + 1);
    const int fj = v / (fm.n + 1);
    const int ci = fi / ratio, a = fi % ratio;
    const int cj = fj / ratio, b = fj % ratio;
    if (a == 0 && b == 0) {
      push(dof, ci, cj, 1.0);
      continue;
    }
    const double x = static_cast<double>(a) / ratio;
    const double y = static_cast<double>(b) / ratio;
    if (b <= a) {  // below the diagonal of the coarse square
      push(dof, ci, cj, 1.0 - x);
      push(dof, ci + 1, cj, x - y);
      push(dof, ci + 1, cj + 1, y);
    } else {
      push(dof, ci, cj, 1.0 - y);
      push(dof, ci + 1, cj + 1, x);
      push(dof, ci, cj + 1, y - x);
    }
  }
  SparseMatrix p(fine.dim(), coarse.dim());
  p.setFromTriplets(triplets.begin(), triplets.end());
  p.makeCompressed();
  return p;
}

// Per-element energies integral_T (A grad u).grad u, with the same
// quadrature averaging of A as assemble_stiffness.
inline Vector element_energies(const FeSpace& space, const MatrixField& coefficient,
                               const QuadratureRule& quad, const Vector& coeffs) {
  const TriMesh& mesh = space.mesh();
  Vector energies(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& geom = space.geometry(t);
    Eigen::Matrix2d abar = Eigen::Matrix2d::Zero();
    for (const auto& q : quad.nodes) abar += q.w * coefficient(detail::quadrature_point(mesh, t, q));
    abar *= 2.0 * geom.area;
    const Eigen::Vector2d grad = geom.grad * space.local_values(t, coeffs);
    energies[t] = grad.dot(abar * grad);
  }
  return energies;
}

inline double h1_seminorm(const FeSpace& space, const Vector& coeffs) {
  const TriMesh& mesh = space.mesh();
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& geom = space.geometry(t);
    const Eigen::Vector2d grad = geom.grad * space.local_values(t, coeffs);
    sum += geom.area * grad.squaredNorm();
  }
  return std::sqrt(sum);
}

inline double l2_norm(const FeSpace& space, const Vector& coeffs) {
  // Exact for piecewise linears: integral of u^2 over T by the degree-2 rule.
  static const QuadratureRule quad = triangle_gauss3(1);
  const TriMesh& mesh = space.mesh();
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double scale = 2.0 * space.geometry(t).area;
    const Eigen::Vector3d vals = space.local_values(t, coeffs);
    for (const auto& q : quad.nodes) {
      const double u = q.b0 * vals[0] + q.b1 * vals[1] + q.b2 * vals[2];
      sum += scale * q.w * u * u;
    }
  }
  return std::sqrt(sum);
}

}  // namespace lod
