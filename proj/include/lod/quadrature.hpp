#pragma once
// Composite Gauss quadrature on triangles.  The base rule is the interior
// three-point rule of degree 2; subdividing the element into s^2 congruent
// subtriangles refines it toward oscillatory coefficients without raising
// the polynomial degree.

#include <stdexcept>
#include <vector>

namespace lod {

struct QuadratureRule {
  // Barycentric nodes on the reference triangle; weights sum to the
  // reference area 1/2, so an element integral is 2*|T| * sum_q w_q f(x_q).
  struct Node {
    double b0, b1, b2;
    double w;
  };
  std::vector<Node> nodes;
  int subdivision = 1;
};

inline QuadratureRule triangle_gauss3(int subdivision = 1) {
  if (subdivision < 1) throw std::invalid_argument("triangle_gauss3: subdivision must be >= 1");
  // Degree-2 rule at (2/3, 1/6, 1/6) and permutations, weight 1/6 each.
  constexpr double pts[3][3] = {
      {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
      {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
      {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0},
  };
  const int s = subdivision;
  const double w = 1.0 / (6.0 * s * s);

  QuadratureRule rule;
  rule.subdivision = s;
  rule.nodes.reserve(3 * s * s);
  auto emit_cell = [&](double x0, double y0, double x1, double y1, double x2, double y2) {
    for (const auto& p : pts) {
      const double x = p[0] * x0 + p[1] * x1 + p[2] * x2;
      const double y = p[0] * y0 + p[1] * y1 + p[2] * y2;
      rule.nodes.push_back({1.0 - x - y, x, y, w});
    }
  };
  // Lattice subdivision of the reference triangle {x,y >= 0, x+y <= 1}.
  const double h = 1.0 / s;
  for (int j = 0; j < s; ++j) {
    for (int i = 0; i + j < s; ++i) {
      const double x = i * h;
      const double y = j * h;
      emit_cell(x, y, x + h, y, x, y + h);  // upward cell
      if (i + j < s - 1) emit_cell(x + h, y, x + h, y + h, x, y + h);  // downward cell
    }
  }
  return rule;
}

}  // namespace lod
