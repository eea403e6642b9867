#pragma once
// Semilinear elliptic systems
//   -div(A grad u) + F(x, u, grad u) = g,   u = 0 on the boundary,
// discretized on a fine space and reduced through an arbitrary basis
// (identity for plain fine-space solves, a multiscale basis otherwise),
// solved by damped Newton iterations.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lod/fem.hpp"

namespace lod {

using ReactionValue = std::function<double(const Eigen::Vector2d&, double, const Eigen::Vector2d&)>;
using ReactionGradient =
    std::function<Eigen::Vector2d(const Eigen::Vector2d&, double, const Eigen::Vector2d&)>;

struct SemilinearProblem {
  MatrixField diffusion;          // A(x)
  ReactionValue reaction;         // F(x, u, grad u)
  ReactionValue reaction_du;      // dF/du
  ReactionGradient reaction_dgrad;  // dF/d(grad u)
  ScalarField source;             // g(x)

  // Structural constants, recorded for diagnostics and reports only.
  double ellipticity_lower = 0.0;
  double ellipticity_upper = 0.0;
  double lipschitz_value = 0.0;
  double lipschitz_gradient = 0.0;
  double monotonicity_floor = 0.0;
  double poincare_constant = 0.0;
};

inline SparseMatrix identity_basis(int n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

// Reduced residual and Jacobian of the discrete semilinear operator.  With
// basis B the unknown is alpha, the fine function is B alpha, and
//   G(alpha) = B^T (S_A B alpha + N(B alpha) - b),
//   G'(alpha) = B^T (S_A + K(B alpha)) B,
// where N collects the reaction term and K its value and gradient
// linearizations.
class SemilinearSystem {
 public:
  SemilinearSystem(FeSpace space, SparseMatrix basis, SemilinearProblem problem, QuadratureRule quad)
      : space_(std::move(space)),
        basis_(std::move(basis)),
        problem_(std::move(problem)),
        quad_(std::move(quad)) {
    if (basis_.rows() != space_.dim())
      throw std::invalid_argument("SemilinearSystem: basis row count must match the fine dimension");
    if (basis_.cols() < 1) throw std::invalid_argument("SemilinearSystem: empty basis");
    if (!problem_.diffusion || !problem_.source)
      throw std::invalid_argument("SemilinearSystem: diffusion and source are required");
    const bool has_reaction = static_cast<bool>(problem_.reaction);
    if (has_reaction && (!problem_.reaction_du || !problem_.reaction_dgrad))
      throw std::invalid_argument("SemilinearSystem: reaction given without its derivatives");
    if (!has_reaction) {
      problem_.reaction = [](const Eigen::Vector2d&, double, const Eigen::Vector2d&) { return 0.0; };
      problem_.reaction_du = [](const Eigen::Vector2d&, double, const Eigen::Vector2d&) { return 0.0; };
      problem_.reaction_dgrad = [](const Eigen::Vector2d&, double, const Eigen::Vector2d&) {
        return Eigen::Vector2d::Zero().eval();
      };
    }
    stiffness_ = assemble_stiffness(space_, problem_.diffusion, quad_);
    reduced_stiffness_ = SparseMatrix(basis_.transpose() * stiffness_ * basis_);
    reduced_stiffness_.makeCompressed();
    load_ = basis_.transpose() * assemble_load(space_, problem_.source, quad_);
    const SparseMatrix plain = assemble_stiffness(
        space_, [](const Eigen::Vector2d&) { return Eigen::Matrix2d::Identity().eval(); },
        triangle_gauss3(1));
    h1_gram_ = SparseMatrix(basis_.transpose() * plain * basis_);
    h1_gram_.makeCompressed();
  }

  int dim() const { return static_cast<int>(basis_.cols()); }
  const FeSpace& space() const { return space_; }
  const SparseMatrix& basis() const { return basis_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const SparseMatrix& reduced_stiffness() const { return reduced_stiffness_; }
  const SparseMatrix& h1_gram() const { return h1_gram_; }
  const Vector& load() const { return load_; }
  Vector fine_coefficients(const Vector& alpha) const { return basis_ * alpha; }

  Vector residual(const Vector& alpha) const {
    check_size(alpha);
    const Vector u = basis_ * alpha;
    const TriMesh& mesh = space_.mesh();
    Vector reaction = Vector::Zero(space_.dim());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const auto& geom = space_.geometry(t);
      const Eigen::Vector3d vals = space_.local_values(t, u);
      const Eigen::Vector2d grad_u = geom.grad * vals;
      for (const auto& q : quad_.nodes) {
        const Eigen::Vector2d x = detail::quadrature_point(mesh, t, q);
        const double uq = q.b0 * vals[0] + q.b1 * vals[1] + q.b2 * vals[2];
        const double f = problem_.reaction(x, uq, grad_u);
        if (f == 0.0) continue;
        const double wq = 2.0 * geom.area * q.w * f;
        const double bary[3] = {q.b0, q.b1, q.b2};
        for (int a = 0; a < 3; ++a) {
          const int dof = space_.dof_of_vertex(mesh.triangles[t][a]);
          if (dof >= 0) reaction[dof] += wq * bary[a];
        }
      }
    }
    return reduced_stiffness_ * alpha + basis_.transpose() * reaction - load_;
  }

  SparseMatrix jacobian(const Vector& alpha) const {
    check_size(alpha);
    const Vector u = basis_ * alpha;
    const TriMesh& mesh = space_.mesh();
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<size_t>(mesh.num_triangles()) * 9);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const auto& geom = space_.geometry(t);
      const Eigen::Vector3d vals = space_.local_values(t, u);
      const Eigen::Vector2d grad_u = geom.grad * vals;
      Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
      for (const auto& q : quad_.nodes) {
        const Eigen::Vector2d x = detail::quadrature_point(mesh, t, q);
        const double uq = q.b0 * vals[0] + q.b1 * vals[1] + q.b2 * vals[2];
        const double du = problem_.reaction_du(x, uq, grad_u);
        const Eigen::Vector2d dg = problem_.reaction_dgrad(x, uq, grad_u);
        const double wq = 2.0 * geom.area * q.w;
        const double bary[3] = {q.b0, q.b1, q.b2};
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            local(a, b) += wq * bary[a] * (du * bary[b] + dg.dot(geom.grad.col(b)));
      }
      for (int a = 0; a < 3; ++a) {
        const int ra = space_.dof_of_vertex(mesh.triangles[t][a]);
        if (ra < 0) continue;
        for (int b = 0; b < 3; ++b) {
          const int cb = space_.dof_of_vertex(mesh.triangles[t][b]);
          if (cb >= 0 && local(a, b) != 0.0) triplets.emplace_back(ra, cb, local(a, b));
        }
      }
    }
    SparseMatrix linearized(space_.dim(), space_.dim());
    linearized.setFromTriplets(triplets.begin(), triplets.end());
    SparseMatrix reduced = SparseMatrix(reduced_stiffness_ +
                                        SparseMatrix(basis_.transpose() * linearized * basis_));
    reduced.makeCompressed();
    return reduced;
  }

 private:
  void check_size(const Vector& alpha) const {
    if (alpha.size() != basis_.cols())
      throw std::invalid_argument("SemilinearSystem: coefficient vector has wrong size");
  }

  FeSpace space_;
  SparseMatrix basis_;
  SemilinearProblem problem_;
  QuadratureRule quad_;
  SparseMatrix stiffness_;
  SparseMatrix reduced_stiffness_;
  SparseMatrix h1_gram_;
  Vector load_;
};

struct NewtonConfig {
  double abstol = 1e-10;
  double reltol = 0.0;
  int max_iterations = 50;
  bool damping = true;
};

struct NewtonResult {
  Vector alpha;
  std::vector<double> residual_norms;  // one per visited iterate, including the start
  std::vector<double> step_sizes;      // accepted damping factor per update
  bool converged = false;
  int iterations = 0;
};

// Newton iteration with residual-based step-size control: the trial damping
// factor starts at 1 and is halved until the new residual drops below
// (1 - zeta/2) times the old one.  The stopping tolerance
// |G| * reltol + abstol is re-evaluated against the current residual at the
// top of every iteration.
inline NewtonResult damped_newton(const SemilinearSystem& system, const NewtonConfig& config,
                                  Vector initial = Vector()) {
  if (!(config.abstol > 0.0)) throw std::invalid_argument("damped_newton: abstol must be positive");
  if (config.reltol < 0.0) throw std::invalid_argument("damped_newton: reltol must be nonnegative");
  if (config.max_iterations < 1)
    throw std::invalid_argument("damped_newton: max_iterations must be at least 1");

  NewtonResult result;
  result.alpha = (initial.size() == 0) ? Vector::Zero(system.dim()) : std::move(initial);
  if (result.alpha.size() != system.dim())
    throw std::invalid_argument("damped_newton: initial guess has wrong size");

  Vector g = system.residual(result.alpha);
  double r = g.norm();
  result.residual_norms.push_back(r);

  constexpr double kMinStep = 1.0 / (1u << 30);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (r <= r * config.reltol + config.abstol) {
      result.converged = true;
      return result;
    }
    Eigen::SparseLU<SparseMatrix> lu(system.jacobian(result.alpha));
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("damped_newton: Jacobian factorization failed at iteration " +
                               std::to_string(iter));
    const Vector direction = lu.solve(-g);
    if (!direction.allFinite())
      throw std::runtime_error("damped_newton: Jacobian solve produced non-finite step");

    double zeta = 1.0;
    Vector trial, g_trial;
    double r_trial = 0.0;
    if (config.damping) {
      for (;;) {
        trial = result.alpha + zeta * direction;
        g_trial = system.residual(trial);
        r_trial = g_trial.norm();
        if (r_trial < (1.0 - 0.5 * zeta) * r) break;
        zeta *= 0.5;
        if (zeta < kMinStep)
          throw std::runtime_error(
              "damped_newton: step size underflow; the iteration cannot reduce the residual");
      }
    } else {
      trial = result.alpha + direction;
      g_trial = system.residual(trial);
      r_trial = g_trial.norm();
    }

    result.alpha = std::move(trial);
    g = std::move(g_trial);
    r = r_trial;
    result.residual_norms.push_back(r);
    result.step_sizes.push_back(zeta);
    ++result.iterations;
  }
  result.converged = (r <= r * config.reltol + config.abstol);
  return result;
}

// Empirical strong monotonicity of the reduced operator: the smallest value
// of  <G(u) - G(v), u - v> / |u - v|_{H1}^2  over random coefficient pairs
// with nodal values drawn uniformly from [low, high].
inline double monotonicity_probe(const SemilinearSystem& system, int pairs, unsigned seed,
                                 double low = -2.0, double high = 0.0) {
  if (pairs < 1) throw std::invalid_argument("monotonicity_probe: need at least one pair");
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(low, high);
  const int n = system.dim();
  double worst = std::numeric_limits<double>::max();
  for (int p = 0; p < pairs; ++p) {
    Vector u(n), v(n);
    double h1sq = 0.0;
    do {
      for (int i = 0; i < n; ++i) u[i] = uni(rng);
      for (int i = 0; i < n; ++i) v[i] = uni(rng);
      const Vector d = u - v;
      h1sq = d.dot(system.h1_gram() * d);
    } while (h1sq == 0.0);  // resample coincident draws
    const Vector d = u - v;
    const double pairing = (system.residual(u) - system.residual(v)).dot(d);
    worst = std::min(worst, pairing / h1sq);
  }
  return worst;
}

}  // namespace lod
