#pragma once
// Structured triangulations of the unit square with nested uniform
// refinement and vertex-centered patches for localized corrector problems.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lod {

// Triangulation of [0,1]^2 into 2*n^2 congruent right triangles: an n-by-n
// grid of squares, each split along its south-west/north-east diagonal.
//
// Numbering is canonical so that meshes of equal n are identical objects no
// matter how they were produced: vertex (i,j) -> j*(n+1)+i at (i/n, j/n);
// square (i,j) -> index j*n+i; triangle 2*square for the half below the
// diagonal, 2*square+1 for the half above.  All triangles are
// counter-clockwise.
struct TriMesh {
  int n = 0;      // grid subdivisions per side
  int level = 0;  // refinement generation
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<bool> vertex_on_boundary;
  // Ancestor triangle in the mesh this one was refined from (empty when the
  // mesh was built directly).  refine_uniform composes the map across levels
  // so entries always refer to its input mesh.
  std::vector<int> parent_triangle;
  std::vector<std::vector<int>> vertex_star;  // incident triangles per vertex

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  double grid_spacing() const { return 1.0 / n; }
  double element_diameter() const { return std::sqrt(2.0) / n; }
  int vertex_index(int i, int j) const { return j * (n + 1) + i; }

  double triangle_area(int t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector2d e1 = vertices[tri[1]] - vertices[tri[0]];
    const Eigen::Vector2d e2 = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }

  Eigen::Vector2d centroid(int t) const {
    const auto& tri = triangles[t];
    return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
  }
};

inline TriMesh build_unit_square_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_unit_square_mesh: n must be >= 1");
  TriMesh mesh;
  mesh.n = n;
  mesh.level = 0;
  mesh.vertices.reserve((n + 1) * (n + 1));
  mesh.vertex_on_boundary.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const double x = static_cast<double>(i) / n;
      const double y = static_cast<double>(j) / n;
      mesh.vertices.emplace_back(x, y);
      mesh.vertex_on_boundary.push_back(x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0);
    }
  }
  mesh.triangles.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = mesh.vertex_index(i, j);
      const int v10 = mesh.vertex_index(i + 1, j);
      const int v01 = mesh.vertex_index(i, j + 1);
      const int v11 = mesh.vertex_index(i + 1, j + 1);
      mesh.triangles.push_back({v00, v10, v11});  // below the diagonal
      mesh.triangles.push_back({v00, v11, v01});  // above the diagonal
    }
  }
  mesh.vertex_star.resize(mesh.vertices.size());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int v : mesh.triangles[t]) mesh.vertex_star[v].push_back(t);
  return mesh;
}

// Maps each triangle of `fine` to the triangle of `coarse` containing it.
// Both meshes must be canonical unit-square triangulations with
// fine.n a multiple of coarse.n, which makes the map arithmetic.
inline std::vector<int> fine_ancestors(const TriMesh& coarse, const TriMesh& fine) {
  if (coarse.n < 1 || fine.n < 1 || fine.n % coarse.n != 0)
    throw std::invalid_argument("fine_ancestors: meshes are not nested (fine.n must be a multiple of coarse.n)");
  const int ratio = fine.n / coarse.n;
  std::vector<int> ancestor(fine.num_triangles());
  for (int t = 0; t < fine.num_triangles(); ++t) {
    const int square = t / 2;
    const int kind = t % 2;  // 0: below the diagonal, 1: above
    const int i = square % fine.n;
    const int j = square / fine.n;
    const int a = i % ratio;
    const int b = j % ratio;
    const int coarse_square = (j / ratio) * coarse.n + (i / ratio);
    // A fine square strictly below the coarse diagonal (b < a) lies in the
    // lower coarse triangle, strictly above (b > a) in the upper one; squares
    // straddling the diagonal (a == b) split between the two exactly as the
    // fine triangles do.
    int coarse_kind;
    if (b < a)
      coarse_kind = 0;
    else if (b > a)
      coarse_kind = 1;
    else
      coarse_kind = kind;
    ancestor[t] = 2 * coarse_square + coarse_kind;
  }
  return ancestor;
}

// Refines `levels` times by shrinking the grid spacing by 2 each time.  The
// result has canonical numbering (identical to building at n*2^levels
// directly); parent_triangle maps each fine triangle to its ancestor in
// `mesh`, and the four children of a triangle tile it exactly.
inline TriMesh refine_uniform(const TriMesh& mesh, int levels) {
  if (levels < 1) throw std::invalid_argument("refine_uniform: levels must be >= 1");
  if (mesh.n < 1) throw std::invalid_argument("refine_uniform: mesh is empty");
  TriMesh fine = build_unit_square_mesh(mesh.n << levels);
  fine.level = mesh.level + levels;
  fine.parent_triangle = fine_ancestors(mesh, fine);
  return fine;
}

// omega_{j,k}: union of fine-mesh triangles around coarse vertex `center`.
// Integer layer counts follow the coarse-element recursion (layer 1 is the
// support of the hat at `center`; each further layer adds every coarse
// element sharing a vertex with the current patch).  A trailing half layer
// adds round(0.5 * H/h) rings of fine triangles by vertex adjacency.
struct Patch {
  int center = -1;       // coarse vertex the patch grew from
  double layers = 0.0;   // requested layer count k (multiple of 0.5)
  int fine_layer_count = 0;  // round(k * H/h), recorded for reports
  bool covers_domain = false;
  std::vector<int> fine_triangles;          // sorted
  std::vector<int> interior_fine_vertices;  // sorted; off the patch boundary and off the domain boundary
  std::vector<int> coarse_nodes_touching;   // sorted interior coarse vertices whose hat meets the patch interior
};

namespace detail {

// Grow a triangle set by one-vertex adjacency: each step joins every triangle
// sharing a vertex with the current set.  Stops early once saturated.
inline void grow_triangle_set(const TriMesh& mesh, std::vector<char>& in_set, int steps) {
  for (int step = 0; step < steps; ++step) {
    std::vector<char> vertex_marked(mesh.num_vertices(), 0);
    for (int t = 0; t < mesh.num_triangles(); ++t)
      if (in_set[t])
        for (int v : mesh.triangles[t]) vertex_marked[v] = 1;
    bool grew = false;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      if (in_set[t]) continue;
      for (int v : mesh.triangles[t]) {
        if (vertex_marked[v]) {
          in_set[t] = 1;
          grew = true;
          break;
        }
      }
    }
    if (!grew) break;  // saturated: the set already covers the domain
  }
}

// Fill the derived Patch fields (triangle list, interior vertices, touching
// coarse nodes) from a fine-triangle membership mask.
inline void finalize_patch(const TriMesh& coarse, const TriMesh& fine,
                           const std::vector<int>& ancestor, const std::vector<char>& fine_in,
                           Patch& patch) {
  for (int t = 0; t < fine.num_triangles(); ++t)
    if (fine_in[t]) patch.fine_triangles.push_back(t);
  patch.covers_domain = static_cast<int>(patch.fine_triangles.size()) == fine.num_triangles();

  // Interior vertices: every incident triangle belongs to the patch and the
  // vertex is off the domain boundary.
  std::vector<int> incident(fine.num_vertices(), 0);
  for (int t : patch.fine_triangles)
    for (int v : fine.triangles[t]) ++incident[v];
  for (int v = 0; v < fine.num_vertices(); ++v) {
    if (incident[v] == 0 || fine.vertex_on_boundary[v]) continue;
    if (incident[v] == static_cast<int>(fine.vertex_star[v].size()))
      patch.interior_fine_vertices.push_back(v);
  }

  // Coarse hats meeting the patch interior: a hat of the ancestor triangle of
  // T is nonzero on a positive-area part of T, so it pairs nontrivially with
  // the fine hat of any patch-interior vertex of T.
  std::vector<char> interior_mark(fine.num_vertices(), 0);
  for (int v : patch.interior_fine_vertices) interior_mark[v] = 1;
  std::vector<char> touching(coarse.num_vertices(), 0);
  for (int t : patch.fine_triangles) {
    bool has_interior_vertex = false;
    for (int v : fine.triangles[t]) has_interior_vertex |= static_cast<bool>(interior_mark[v]);
    if (!has_interior_vertex) continue;
    for (int cv : coarse.triangles[ancestor[t]])
      if (!coarse.vertex_on_boundary[cv]) touching[cv] = 1;
  }
  for (int cv = 0; cv < coarse.num_vertices(); ++cv)
    if (touching[cv]) patch.coarse_nodes_touching.push_back(cv);
}

}  // namespace detail

inline Patch nodal_patch(const TriMesh& coarse, const TriMesh& fine, int center_vertex, double layers) {
  if (center_vertex < 0 || center_vertex >= coarse.num_vertices())
    throw std::invalid_argument("nodal_patch: vertex index out of range");
  if (coarse.vertex_on_boundary[center_vertex])
    throw std::invalid_argument("nodal_patch: patches are centered at interior vertices only");
  const double twice = 2.0 * layers;
  if (layers < 1.0 - 1e-9 || std::abs(twice - std::llround(twice)) > 1e-9)
    throw std::invalid_argument("nodal_patch: layer count must be >= 1 in steps of 0.5");
  if (fine.n % coarse.n != 0)
    throw std::invalid_argument("nodal_patch: fine mesh does not nest in coarse mesh");

  const int ratio = fine.n / coarse.n;
  const int whole = static_cast<int>(std::llround(std::floor(layers + 1e-9)));
  const bool half = std::llround(twice) % 2 != 0;

  // Coarse-element growth by vertex adjacency; the hat support is layer one.
  std::vector<char> tri_in(coarse.num_triangles(), 0);
  for (int t : coarse.vertex_star[center_vertex]) tri_in[t] = 1;
  detail::grow_triangle_set(coarse, tri_in, whole - 1);

  const std::vector<int> ancestor = fine_ancestors(coarse, fine);
  std::vector<char> fine_in(fine.num_triangles(), 0);
  for (int t = 0; t < fine.num_triangles(); ++t) fine_in[t] = tri_in[ancestor[t]];

  if (half) detail::grow_triangle_set(fine, fine_in, static_cast<int>(std::llround(0.5 * ratio)));

  Patch patch;
  patch.center = center_vertex;
  patch.layers = layers;
  patch.fine_layer_count = static_cast<int>(std::llround(layers * ratio));
  detail::finalize_patch(coarse, fine, ancestor, fine_in, patch);
  return patch;
}

// Patch around one coarse element: its own fine triangles plus `fine_steps`
// one-vertex-adjacency layers of fine triangles.  Element patches feed the
// element-wise corrector assembly, which solves two unit-vector responses per
// coarse element instead of one gradient response per coarse node.
inline Patch element_patch(const TriMesh& coarse, const TriMesh& fine, int coarse_triangle,
                           int fine_steps) {
  if (coarse_triangle < 0 || coarse_triangle >= coarse.num_triangles())
    throw std::invalid_argument("element_patch: triangle index out of range");
  if (fine_steps < 1) throw std::invalid_argument("element_patch: fine_steps must be >= 1");
  if (fine.n % coarse.n != 0)
    throw std::invalid_argument("element_patch: fine mesh does not nest in coarse mesh");

  const std::vector<int> ancestor = fine_ancestors(coarse, fine);
  std::vector<char> fine_in(fine.num_triangles(), 0);
  for (int t = 0; t < fine.num_triangles(); ++t) fine_in[t] = ancestor[t] == coarse_triangle;
  detail::grow_triangle_set(fine, fine_in, fine_steps);

  Patch patch;
  patch.center = -1;
  patch.layers = static_cast<double>(fine_steps) * coarse.n / fine.n;
  patch.fine_layer_count = fine_steps;
  detail::finalize_patch(coarse, fine, ancestor, fine_in, patch);
  return patch;
}

// Patch spanning the whole fine mesh (untruncated corrector problems).
inline Patch global_patch(const TriMesh& coarse, const TriMesh& fine) {
  Patch patch;
  patch.center = -1;
  patch.layers = std::numeric_limits<double>::infinity();
  patch.fine_layer_count = 2 * fine.n;  // any bound covering the domain
  patch.covers_domain = true;
  patch.fine_triangles.resize(fine.num_triangles());
  for (int t = 0; t < fine.num_triangles(); ++t) patch.fine_triangles[t] = t;
  for (int v = 0; v < fine.num_vertices(); ++v)
    if (!fine.vertex_on_boundary[v]) patch.interior_fine_vertices.push_back(v);
  for (int cv = 0; cv < coarse.num_vertices(); ++cv)
    if (!coarse.vertex_on_boundary[cv]) patch.coarse_nodes_touching.push_back(cv);
  return patch;
}

// Plain-text dump for debugging: one "x y" line per vertex, then one
// "i j k" line of 0-based vertex indices per triangle.
inline void dump_mesh(const TriMesh& mesh, std::ostream& out) {
  out.precision(17);
  for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace lod
