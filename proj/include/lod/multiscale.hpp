#pragma once
// Patch-localized corrector problems and the resulting multiscale basis.
//
// For each interior coarse node j the corrector phi_j solves, on the node's
// patch and subject to vanishing quasi-interpolation,
//   a(phi_j, w) = a(lift hat_j, w)   for all kernel test functions w,
// enforced with Lagrange multipliers on the interpolation constraint rows.
// The multiscale basis column is then lift(hat_j) - phi_j.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lod/clement.hpp"
#include "lod/fem.hpp"
#include "lod/parallel.hpp"

namespace lod {

struct Corrector {
  int coarse_dof = -1;
  double layers = 0.0;
  Vector coefficients;          // fine-space vector, exact zeros off the patch
  double energy = 0.0;          // a(phi, phi)
  double solver_residual = 0.0; // relative residual of the bordered solve
};

namespace detail {

// Bordered patch system shared by the nodal and element-wise corrector
// assemblies: the patch-interior block of the fine stiffness with the kernel
// constraint rows appended symmetrically.  The interior block is a principal
// submatrix of the fine stiffness and therefore symmetric positive definite;
// the system is factored once by sparse LU (Schur-complement fallback on the
// interior block) and reused for every right-hand side on the same patch.
class PatchSaddleSolver {
 public:
  PatchSaddleSolver(const FeSpace& coarse, const FeSpace& fine, const SparseMatrix& fine_stiffness,
                    const ClementOperator& op, const Patch& patch, std::string context)
      : context_(std::move(context)), stiffness_(&fine_stiffness), fine_dim_(fine.dim()) {
    n_local_ = static_cast<int>(patch.interior_fine_vertices.size());
    if (n_local_ == 0) throw std::invalid_argument(context_ + ": empty patch interior");

    local_of_dof_.assign(fine.dim(), -1);
    global_dofs_.resize(n_local_);
    for (int c = 0; c < n_local_; ++c) {
      const int dof = fine.dof_of_vertex(patch.interior_fine_vertices[c]);
      if (dof < 0)
        throw std::invalid_argument(context_ + ": patch interior vertex lies on the boundary");
      local_of_dof_[dof] = c;
      global_dofs_[c] = dof;
    }

    constraints_ = kernel_constraint_rows(op, patch, coarse, fine);
    m_ = static_cast<int>(constraints_.rows.rows());

    std::vector<Triplet> triplets;
    for (int c = 0; c < n_local_; ++c) {
      for (SparseMatrix::InnerIterator it(fine_stiffness, global_dofs_[c]); it; ++it) {
        const int r = local_of_dof_[static_cast<int>(it.row())];
        if (r >= 0) triplets.emplace_back(r, c, it.value());
      }
    }
    for (int c = 0; c < constraints_.rows.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(constraints_.rows, c); it; ++it) {
        triplets.emplace_back(n_local_ + static_cast<int>(it.row()), static_cast<int>(it.col()),
                              it.value());
        triplets.emplace_back(static_cast<int>(it.col()), n_local_ + static_cast<int>(it.row()),
                              it.value());
      }
    }
    bordered_.resize(n_local_ + m_, n_local_ + m_);
    bordered_.setFromTriplets(triplets.begin(), triplets.end());
    bordered_.makeCompressed();

    lu_.compute(bordered_);
    lu_ok_ = lu_.info() == Eigen::Success;
    if (!lu_ok_) factor_interior();
  }

  int interior_size() const { return n_local_; }
  const std::vector<int>& global_dofs() const { return global_dofs_; }

  // Restrict a fine-space right-hand side to the patch interior, solve, and
  // scatter the solution back as a fine-space vector with exact zeros off the
  // patch.  `residual` receives the relative residual of the bordered solve.
  Vector solve(const Vector& rhs_full, double& residual) {
    Vector b = Vector::Zero(n_local_ + m_);
    for (int c = 0; c < n_local_; ++c) b[c] = rhs_full[global_dofs_[c]];

    Vector x;
    if (lu_ok_) x = lu_.solve(b);
    if (!lu_ok_ || !x.allFinite()) {
      if (!schur_ready_) factor_interior();
      x = schur_solve(b);
    }

    const double scale = std::max(1.0, b.norm());
    residual = (bordered_ * x - b).norm() / scale;
    if (!(residual <= 1e-10))
      throw std::runtime_error(context_ + ": bordered solve residual " + std::to_string(residual));

    Vector out = Vector::Zero(fine_dim_);
    for (int c = 0; c < n_local_; ++c) out[global_dofs_[c]] = x[c];
    return out;
  }

 private:
  void factor_interior() {
    SparseMatrix app(n_local_, n_local_);
    {
      std::vector<Triplet> at;
      for (int c = 0; c < n_local_; ++c)
        for (SparseMatrix::InnerIterator it(*stiffness_, global_dofs_[c]); it; ++it) {
          const int r = local_of_dof_[static_cast<int>(it.row())];
          if (r >= 0) at.emplace_back(r, c, it.value());
        }
      app.setFromTriplets(at.begin(), at.end());
    }
    llt_.compute(app);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error(context_ + ": interior block not positive definite");
    ct_ = Eigen::MatrixXd(constraints_.rows).transpose();
    Eigen::MatrixXd schur(m_, m_);
    for (int r = 0; r < m_; ++r)
      schur.col(r) = constraints_.rows * llt_.solve(Eigen::VectorXd(ct_.col(r)));
    schur_ldlt_.compute(schur);
    schur_ready_ = true;
  }

  Vector schur_solve(const Vector& b) const {
    const Vector y0 = llt_.solve(Eigen::VectorXd(b.head(n_local_)));
    const Eigen::VectorXd mu = schur_ldlt_.solve(constraints_.rows * y0 - b.tail(m_));
    Vector x(n_local_ + m_);
    x.head(n_local_) = y0 - llt_.solve(Eigen::VectorXd(ct_ * mu));
    x.tail(m_) = mu;
    return x;
  }

  std::string context_;
  const SparseMatrix* stiffness_ = nullptr;
  int fine_dim_ = 0;
  int n_local_ = 0;
  int m_ = 0;
  std::vector<int> local_of_dof_;
  std::vector<int> global_dofs_;
  ConstraintBlock constraints_;
  SparseMatrix bordered_;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool lu_ok_ = false;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
  Eigen::MatrixXd ct_;
  Eigen::LDLT<Eigen::MatrixXd> schur_ldlt_;
  bool schur_ready_ = false;
};

}  // namespace detail

// Solve the constrained patch problem for one coarse dof.
inline Corrector solve_corrector(const FeSpace& coarse, const FeSpace& fine,
                                 const SparseMatrix& fine_stiffness, const SparseMatrix& lift,
                                 const ClementOperator& op, const Patch& patch, int coarse_dof) {
  if (coarse_dof < 0 || coarse_dof >= coarse.dim())
    throw std::invalid_argument("solve_corrector: coarse dof out of range");
  detail::PatchSaddleSolver solver(coarse, fine, fine_stiffness, op, patch,
                                   "solve_corrector: coarse dof " + std::to_string(coarse_dof));
  const Vector rhs_full = fine_stiffness * (lift * Vector::Unit(coarse.dim(), coarse_dof));

  Corrector out;
  out.coarse_dof = coarse_dof;
  out.layers = patch.layers;
  out.coefficients = solver.solve(rhs_full, out.solver_residual);
  out.energy = out.coefficients.dot(fine_stiffness * out.coefficients);
  return out;
}

struct MultiscaleBasis {
  double layers = 0.0;
  SparseMatrix basis;       // fine dofs x coarse dofs, column j = lift(hat_j) - phi_j
  SparseMatrix correctors;  // fine dofs x coarse dofs, column j = phi_j
  std::vector<double> corrector_energies;
  double max_solver_residual = 0.0;
};

inline MultiscaleBasis build_ms_basis(const FeSpace& coarse, const FeSpace& fine,
                                      const SparseMatrix& fine_stiffness, const ClementOperator& op,
                                      double layers, unsigned num_threads = 0) {
  const SparseMatrix lift = prolongation(coarse, fine);
  const int num_cols = coarse.dim();
  std::vector<Corrector> solved(num_cols);
  parallel_for(
      num_cols,
      [&](int j) {
        const lod::Patch patch =
            nodal_patch(coarse.mesh(), fine.mesh(), coarse.vertex_of_dof(j), layers);
        solved[j] = solve_corrector(coarse, fine, fine_stiffness, lift, op, patch, j);
      },
      num_threads);

  MultiscaleBasis out;
  out.layers = layers;
  out.corrector_energies.resize(num_cols);
  std::vector<Triplet> basis_triplets;
  std::vector<Triplet> corr_triplets;
  for (int j = 0; j < num_cols; ++j) {
    out.corrector_energies[j] = solved[j].energy;
    out.max_solver_residual = std::max(out.max_solver_residual, solved[j].solver_residual);
    for (SparseMatrix::InnerIterator it(lift, j); it; ++it)
      basis_triplets.emplace_back(static_cast<int>(it.row()), j, it.value());
    const Vector& phi = solved[j].coefficients;
    for (int i = 0; i < phi.size(); ++i)
      if (phi[i] != 0.0) {
        basis_triplets.emplace_back(i, j, -phi[i]);
        corr_triplets.emplace_back(i, j, phi[i]);
      }
    solved[j].coefficients.resize(0);  // release before assembling the next columns
  }
  out.basis.resize(fine.dim(), num_cols);
  out.basis.setFromTriplets(basis_triplets.begin(), basis_triplets.end());
  out.basis.makeCompressed();
  out.correctors.resize(fine.dim(), num_cols);
  out.correctors.setFromTriplets(corr_triplets.begin(), corr_triplets.end());
  out.correctors.makeCompressed();
  return out;
}

// Element-wise corrector assembly.  For each coarse element T and coordinate
// direction i, solve on the patch around T
//   a(q_{T,i}, w) = int_T (A e_i) . grad w   for all kernel test functions w,
// then combine the responses per interior coarse node j with the constant
// hat gradients,
//   phi_j = sum over T in star(j) of  grad(hat_j)|_T . (q_{T,1}, q_{T,2}).
// Summed over the star those right-hand sides telescope to a(hat_j, .), so
// with full-width patches the combined correctors coincide with the nodal
// ones solved by build_ms_basis.  With truncated patches the localization
// acts per element rather than per node, which keeps the basis accurate at
// much smaller patch widths.
//
// The patch width is layers * (coarse spacing / fine spacing) fine adjacency
// steps, or `fine_steps_override` when positive.
inline MultiscaleBasis build_ms_basis_by_element(const FeSpace& coarse, const FeSpace& fine,
                                                 const SparseMatrix& fine_stiffness,
                                                 const ClementOperator& op,
                                                 const QuadratureRule& quad,
                                                 const MatrixField& coefficient, double layers,
                                                 int fine_steps_override = -1,
                                                 unsigned num_threads = 0) {
  const TriMesh& cm = coarse.mesh();
  const TriMesh& fm = fine.mesh();
  if (fm.n % cm.n != 0)
    throw std::invalid_argument("build_ms_basis_by_element: fine mesh does not nest in coarse mesh");
  const int ratio = fm.n / cm.n;
  const int steps = fine_steps_override > 0 ? fine_steps_override
                                            : static_cast<int>(std::llround(layers * ratio));
  if (steps < 1)
    throw std::invalid_argument("build_ms_basis_by_element: patch width must be at least one fine layer");

  const SparseMatrix lift = prolongation(coarse, fine);
  const std::vector<int> ancestor = fine_ancestors(cm, fm);
  std::vector<std::vector<int>> children(cm.num_triangles());
  for (int t = 0; t < fm.num_triangles(); ++t) children[ancestor[t]].push_back(t);

  struct ElementResponse {
    std::vector<std::pair<int, double>> q[2];  // nonzeros of the two responses
    double residual = 0.0;
  };
  const int num_elements = cm.num_triangles();
  std::vector<ElementResponse> responses(num_elements);

  parallel_for(
      num_elements,
      [&](int T) {
        const Patch patch = element_patch(cm, fm, T, steps);
        detail::PatchSaddleSolver solver(
            coarse, fine, fine_stiffness, op, patch,
            "build_ms_basis_by_element: coarse element " + std::to_string(T));
        Vector rhs[2] = {Vector::Zero(fine.dim()), Vector::Zero(fine.dim())};
        for (int t : children[T]) {
          const auto& g = fine.geometry(t);
          for (const auto& node : quad.nodes) {
            const Eigen::Vector2d x = detail::quadrature_point(fm, t, node);
            const Eigen::Matrix2d ax = coefficient(x);
            const double w = node.w * 2.0 * g.area;
            for (int a = 0; a < 3; ++a) {
              const int dof = fine.dof_of_vertex(fm.triangles[t][a]);
              if (dof < 0) continue;
              const Eigen::Vector2d moment = ax.transpose() * g.grad.col(a);
              rhs[0][dof] += w * moment[0];
              rhs[1][dof] += w * moment[1];
            }
          }
        }
        for (int i = 0; i < 2; ++i) {
          double residual = 0.0;
          const Vector q = solver.solve(rhs[i], residual);
          responses[T].residual = std::max(responses[T].residual, residual);
          for (int r = 0; r < q.size(); ++r)
            if (q[r] != 0.0) responses[T].q[i].emplace_back(r, q[r]);
        }
      },
      num_threads);

  MultiscaleBasis out;
  out.layers = static_cast<double>(steps) / ratio;
  out.corrector_energies.assign(coarse.dim(), 0.0);
  for (const auto& resp : responses)
    out.max_solver_residual = std::max(out.max_solver_residual, resp.residual);

  std::vector<Triplet> basis_triplets;
  std::vector<Triplet> corr_triplets;
  Vector phi(fine.dim());
  for (int j = 0; j < coarse.dim(); ++j) {
    phi.setZero();
    const int vj = coarse.vertex_of_dof(j);
    for (int T : cm.vertex_star[vj]) {
      int a_loc = -1;
      for (int a = 0; a < 3; ++a)
        if (cm.triangles[T][a] == vj) a_loc = a;
      const Eigen::Vector2d grad = coarse.geometry(T).grad.col(a_loc);
      for (int i = 0; i < 2; ++i)
        for (const auto& [row, value] : responses[T].q[i]) phi[row] += grad[i] * value;
    }
    out.corrector_energies[j] = phi.dot(fine_stiffness * phi);
    for (SparseMatrix::InnerIterator it(lift, j); it; ++it)
      basis_triplets.emplace_back(static_cast<int>(it.row()), j, it.value());
    for (int r = 0; r < phi.size(); ++r)
      if (phi[r] != 0.0) {
        basis_triplets.emplace_back(r, j, -phi[r]);
        corr_triplets.emplace_back(r, j, phi[r]);
      }
  }
  out.basis.resize(fine.dim(), coarse.dim());
  out.basis.setFromTriplets(basis_triplets.begin(), basis_triplets.end());
  out.basis.makeCompressed();
  out.correctors.resize(fine.dim(), coarse.dim());
  out.correctors.setFromTriplets(corr_triplets.begin(), corr_triplets.end());
  out.correctors.makeCompressed();
  return out;
}

// Least-squares line through (x_i, log y_i); used to quantify exponential
// decay of corrector energy tails.
struct LogLinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

inline LogLinearFit fit_log_linear(const std::vector<double>& xs, const std::vector<double>& ys,
                                   double floor_value) {
  LogLinearFit fit;
  std::vector<double> x, ly;
  for (size_t i = 0; i < xs.size(); ++i)
    if (ys[i] > floor_value) {
      x.push_back(xs[i]);
      ly.push_back(std::log(ys[i]));
    }
  fit.points = static_cast<int>(x.size());
  if (fit.points < 2) return fit;
  double sx = 0.0, sy = 0.0;
  for (int i = 0; i < fit.points; ++i) {
    sx += x[i];
    sy += ly[i];
  }
  const double mx = sx / fit.points, my = sy / fit.points;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < fit.points; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

struct DecayProfile {
  int coarse_vertex = -1;
  std::vector<double> layer_counts;   // patch widths k
  std::vector<double> tail_energies;  // energy fraction outside the k-patch
  double theta = 0.0;                 // fitted per-layer decay factor exp(slope)
  double r_squared = 0.0;
  double total_energy = 0.0;
};

// Tail-energy floor below which values are considered roundoff and excluded
// from the decay fit.
inline constexpr double kTailFloor = 1e-13;

inline DecayProfile decay_profile(const FeSpace& coarse, const FeSpace& fine,
                                  const SparseMatrix& fine_stiffness, const MatrixField& coefficient,
                                  const QuadratureRule& quad, const ClementOperator& op,
                                  int coarse_vertex, const std::vector<double>& layer_values) {
  const int dof = coarse.dof_of_vertex(coarse_vertex);
  if (dof < 0) throw std::invalid_argument("decay_profile: boundary vertex has no corrector");
  const SparseMatrix lift = prolongation(coarse, fine);
  const Patch global = global_patch(coarse.mesh(), fine.mesh());
  const Corrector full = solve_corrector(coarse, fine, fine_stiffness, lift, op, global, dof);

  const Vector energies = element_energies(fine, coefficient, quad, full.coefficients);
  const double total = energies.sum();
  if (!(total > 0.0)) throw std::runtime_error("decay_profile: corrector has no energy");

  DecayProfile prof;
  prof.coarse_vertex = coarse_vertex;
  prof.total_energy = total;
  for (double k : layer_values) {
    const Patch pk = nodal_patch(coarse.mesh(), fine.mesh(), coarse_vertex, k);
    std::vector<char> inside(fine.mesh().num_triangles(), 0);
    for (int t : pk.fine_triangles) inside[t] = 1;
    double outside = 0.0;
    for (int t = 0; t < fine.mesh().num_triangles(); ++t)
      if (!inside[t]) outside += energies[t];
    prof.layer_counts.push_back(k);
    prof.tail_energies.push_back(outside / total);
  }
  const LogLinearFit fit = fit_log_linear(prof.layer_counts, prof.tail_energies, kTailFloor);
  prof.theta = (fit.points >= 2) ? std::exp(fit.slope) : 0.0;
  prof.r_squared = fit.r_squared;
  return prof;
}

// Energy-norm distance between two fine-space vectors, e.g. a truncated
// corrector against its full-domain counterpart.
inline double energy_distance(const SparseMatrix& fine_stiffness, const Vector& u, const Vector& v) {
  const Vector d = u - v;
  return std::sqrt(d.dot(fine_stiffness * d));
}

}  // namespace lod
