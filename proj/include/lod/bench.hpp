#pragma once
// Benchmark problem with oscillatory diffusion and a saturating,
// gradient-coupled reaction, plus the study drivers: convergence tables
// against a fine reference solution, corrector-decay profiles, and single
// solves with iteration histories.  Results are emitted as CSV or JSON.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lod/clement.hpp"
#include "lod/fem.hpp"
#include "lod/mesh.hpp"
#include "lod/multiscale.hpp"
#include "lod/newton.hpp"

namespace lod {

// Monomial coefficients (a, b, c, d) of the cubic a u^3 + b u^2 + c u + d
// that joins the square-root branch at u = -5/4 and flattens to zero at
// u = -1 with matching first derivatives.
inline Eigen::Vector4d saturation_bridge_coefficients() {
  const double ua = -1.25, ub = -1.0;
  const double va = std::sqrt(7.0 / 8.0);
  const double da = 1.0 / (4.0 * std::sqrt(7.0 / 8.0));
  Eigen::Matrix4d m;
  m << ua * ua * ua, ua * ua, ua, 1.0,
       3.0 * ua * ua, 2.0 * ua, 1.0, 0.0,
       ub * ub * ub, ub * ub, ub, 1.0,
       3.0 * ub * ub, 2.0 * ub, 1.0, 0.0;
  return m.fullPivLu().solve(Eigen::Vector4d(va, da, 0.0, 0.0));
}

// Piecewise C1 profile: sqrt(u/2 + 3/2) on [-3, -5/4], a cubic bridge on
// [-5/4, -1], zero for u >= -1, and zero below -3 (outside the modeled
// range; solutions stay well inside it).
class SaturationProfile {
 public:
  SaturationProfile() : coef_(saturation_bridge_coefficients()) {}

  double value(double u) const {
    if (u >= -1.0) return 0.0;
    if (u >= -1.25) return ((coef_[0] * u + coef_[1]) * u + coef_[2]) * u + coef_[3];
    if (u >= -3.0) return std::sqrt(0.5 * u + 1.5);
    return 0.0;
  }

  double derivative(double u) const {
    if (u >= -1.0) return 0.0;
    if (u >= -1.25) return (3.0 * coef_[0] * u + 2.0 * coef_[1]) * u + coef_[2];
    if (u > -3.0) return 0.25 / std::sqrt(0.5 * u + 1.5);
    return 0.0;
  }

  const Eigen::Vector4d& coefficients() const { return coef_; }

 private:
  Eigen::Vector4d coef_;
};

// The oscillatory test problem:
//   A(x) = (1/8pi^2) diag( 2 (2 + cos(2 pi x1 / eps))^{-1},
//                          1 + cos(2 pi x1 / eps) / 2 ),
//   F(x, u, grad u) = 1/2 * (1/8pi^2) (2 + cos(2 pi x1 / eps^{3/2})) s(u) * d2 u,
//   g = -3/10,
// with s the saturation profile above.  with_reaction=false drops F for
// linear sanity studies on the same diffusion field.
inline SemilinearProblem benchmark_problem(double epsilon, bool with_reaction = true) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("benchmark_problem: epsilon must be positive");
  const double pref = 1.0 / (8.0 * M_PI * M_PI);
  const double eps_fast = std::pow(epsilon, 1.5);
  SemilinearProblem p;
  p.diffusion = [pref, epsilon](const Eigen::Vector2d& x) {
    const double c = std::cos(2.0 * M_PI * x.x() / epsilon);
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    a(0, 0) = pref * 2.0 / (2.0 + c);
    a(1, 1) = pref * (1.0 + 0.5 * c);
    return a;
  };
  p.source = [](const Eigen::Vector2d&) { return -0.3; };
  if (with_reaction) {
    const auto sat = std::make_shared<SaturationProfile>();
    const auto modulation = [pref, eps_fast](double x1) {
      return pref * (2.0 + std::cos(2.0 * M_PI * x1 / eps_fast));
    };
    p.reaction = [sat, modulation](const Eigen::Vector2d& x, double u, const Eigen::Vector2d& g) {
      return 0.5 * modulation(x.x()) * sat->value(u) * g.y();
    };
    p.reaction_du = [sat, modulation](const Eigen::Vector2d& x, double u, const Eigen::Vector2d& g) {
      return 0.5 * modulation(x.x()) * sat->derivative(u) * g.y();
    };
    p.reaction_dgrad = [sat, modulation](const Eigen::Vector2d& x, double u, const Eigen::Vector2d&) {
      return Eigen::Vector2d(0.0, 0.5 * modulation(x.x()) * sat->value(u));
    };
  }
  p.ellipticity_lower = pref * 0.5;
  p.ellipticity_upper = pref * 2.0;
  // Lipschitz bounds of F on the working range u in [-2, 0].  The profile is
  // a bump: the bridge cubic falls from sqrt(7/8) to zero over a width of
  // 1/4, so its slope peaks near 5.7 — far above the square-root branch.
  // Both moduli are taken from a dense scan with 2% headroom; the modulation
  // factor is at most 3 pref.
  {
    const SaturationProfile scan;
    double max_val = 0.0, max_slope = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const double u = -2.0 + 2.0 * i / 4000.0;
      max_val = std::max(max_val, std::abs(scan.value(u)));
      max_slope = std::max(max_slope, std::abs(scan.derivative(u)));
    }
    p.lipschitz_value = 0.5 * 3.0 * pref * max_slope * 1.02;
    p.lipschitz_gradient = 0.5 * 3.0 * pref * max_val * 1.02;
  }
  p.monotonicity_floor = 0.0;  // established empirically via monotonicity_probe
  p.poincare_constant = 1.0 / (std::sqrt(2.0) * M_PI);
  return p;
}

struct ExperimentConfig {
  double epsilon = 0.05;
  int fine_level = 6;                          // h = 2^-fine_level
  std::vector<int> coarse_levels = {2, 3, 4, 5};  // H = 2^-level per row
  std::vector<double> layers = {1.5, 2.0, 2.5, 3.0};
  double layer_multiplier = 0.0;  // if > 0: layers = multiplier * log(1/H), nearest half
  std::string corrector = "element";  // "element" or "nodal" corrector assembly
  std::vector<int> fine_layers;       // element-patch widths in fine layers per row;
                                      // empty derives round(layers * H/h)
  int quad_subdivision = 4;
  double abstol = 1e-10;
  double reltol = 0.0;
  int max_iterations = 50;
  unsigned threads = 0;
  bool linear = false;  // drop the reaction term
  std::string out;      // output path; empty writes to stdout
  std::string format = "csv";
};

inline void validate(const ExperimentConfig& c) {
  if (!(c.epsilon > 0.0)) throw std::invalid_argument("config: epsilon must be positive");
  if (c.fine_level < 1 || c.fine_level > 12)
    throw std::invalid_argument("config: fine-level must be between 1 and 12");
  if (c.coarse_levels.empty()) throw std::invalid_argument("config: need at least one coarse level");
  for (int level : c.coarse_levels)
    if (level < 1 || level >= c.fine_level)
      throw std::invalid_argument("config: coarse levels must lie in [1, fine-level)");
  if (c.layer_multiplier < 0.0)
    throw std::invalid_argument("config: layer-multiplier must be nonnegative");
  if (c.layer_multiplier == 0.0) {
    if (c.layers.empty()) throw std::invalid_argument("config: need layers or a layer-multiplier");
    if (c.layers.size() != 1 && c.layers.size() != c.coarse_levels.size())
      throw std::invalid_argument("config: layers must have one entry or one per coarse level");
    for (double k : c.layers)
      if (!(k >= 1.0) || std::abs(2.0 * k - std::round(2.0 * k)) > 1e-9)
        throw std::invalid_argument("config: layers must be >= 1 in half-layer steps");
  }
  if (c.corrector != "element" && c.corrector != "nodal")
    throw std::invalid_argument("config: corrector must be element or nodal");
  if (!c.fine_layers.empty()) {
    if (c.corrector != "element")
      throw std::invalid_argument("config: fine-layers requires the element corrector");
    if (c.fine_layers.size() != 1 && c.fine_layers.size() != c.coarse_levels.size())
      throw std::invalid_argument(
          "config: fine-layers must have one entry or one per coarse level");
    for (int l : c.fine_layers)
      if (l < 1) throw std::invalid_argument("config: fine-layers entries must be at least 1");
  }
  if (c.quad_subdivision < 1 || c.quad_subdivision > 32)
    throw std::invalid_argument("config: quad-subdiv must be between 1 and 32");
  if (!(c.abstol > 0.0)) throw std::invalid_argument("config: abstol must be positive");
  if (c.reltol < 0.0) throw std::invalid_argument("config: reltol must be nonnegative");
  if (c.max_iterations < 1) throw std::invalid_argument("config: max-iterations must be positive");
  if (c.format != "csv" && c.format != "json")
    throw std::invalid_argument("config: format must be csv or json");
}

inline std::vector<double> resolve_layer_schedule(const ExperimentConfig& c) {
  std::vector<double> schedule;
  schedule.reserve(c.coarse_levels.size());
  for (size_t i = 0; i < c.coarse_levels.size(); ++i) {
    double k;
    if (c.layer_multiplier > 0.0) {
      const double raw = c.layer_multiplier * c.coarse_levels[i] * std::log(2.0);
      k = std::max(1.0, std::round(2.0 * raw) / 2.0);
    } else {
      k = (c.layers.size() == 1) ? c.layers[0] : c.layers[i];
    }
    schedule.push_back(k);
  }
  return schedule;
}

// Patch widths in fine adjacency steps, one per coarse level: the explicit
// fine-layers list when given, otherwise round(layers * H/h).
inline std::vector<int> resolve_fine_steps(const ExperimentConfig& c,
                                           const std::vector<double>& schedule) {
  std::vector<int> steps;
  steps.reserve(c.coarse_levels.size());
  for (size_t i = 0; i < c.coarse_levels.size(); ++i) {
    if (!c.fine_layers.empty()) {
      steps.push_back(c.fine_layers.size() == 1 ? c.fine_layers[0] : c.fine_layers[i]);
    } else {
      const int ratio = 1 << (c.fine_level - c.coarse_levels[i]);
      steps.push_back(static_cast<int>(std::llround(schedule[i] * ratio)));
    }
  }
  return steps;
}

struct ConvergenceRow {
  double H = 0.0;
  double coarse_layers = 0.0;
  int fine_layers = 0;
  double l2_error = 0.0;
  double h1_error = 0.0;       // L2 norm plus H1 seminorm
  double h1_seminorm = 0.0;    // logged separately (JSON only)
  double eoc_l2 = std::numeric_limits<double>::quiet_NaN();
  double eoc_h1 = std::numeric_limits<double>::quiet_NaN();
  int newton_iterations = 0;
  double wall_time = 0.0;      // seconds
  bool failed = false;
  std::string failure;
};

struct ConvergenceReport {
  double epsilon = 0.0;
  int fine_level = 0;
  bool linear = false;
  std::string corrector;
  std::vector<ConvergenceRow> rows;
  int fine_newton_iterations = 0;
  std::vector<double> fine_residual_norms;
  std::vector<double> fine_step_sizes;
  double fine_min = 0.0, fine_max = 0.0;  // nodal range of the reference solution
  double avg_eoc_l2 = std::numeric_limits<double>::quiet_NaN();
  double avg_eoc_h1 = std::numeric_limits<double>::quiet_NaN();

  bool any_failed() const {
    for (const auto& r : rows)
      if (r.failed) return true;
    return false;
  }
};

// Nodal range the reference solution is expected to stay in; values outside
// trigger a soft warning, not an error.
inline constexpr double kExpectedRangeLow = -1.85;
inline constexpr double kExpectedRangeHigh = 0.05;

namespace detail {

inline double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::pair<double, double> nodal_range(const Vector& coeffs) {
  if (coeffs.size() == 0) return {0.0, 0.0};
  return {coeffs.minCoeff(), coeffs.maxCoeff()};
}

}  // namespace detail

inline NewtonConfig newton_config_of(const ExperimentConfig& c) {
  NewtonConfig cfg;
  cfg.abstol = c.abstol;
  cfg.reltol = c.reltol;
  cfg.max_iterations = c.max_iterations;
  return cfg;
}

// Solve the benchmark problem on the fine space and, per coarse level,
// through the localized multiscale basis; report errors against the fine
// reference and effective convergence orders between consecutive rows.
inline ConvergenceReport run_convergence(const ExperimentConfig& config) {
  validate(config);
  const std::vector<double> schedule = resolve_layer_schedule(config);
  const std::vector<int> steps = resolve_fine_steps(config, schedule);
  const SemilinearProblem problem = benchmark_problem(config.epsilon, !config.linear);
  const QuadratureRule quad = triangle_gauss3(config.quad_subdivision);
  const QuadratureRule coarse_quad = triangle_gauss3(1);

  const FeSpace fine(std::make_shared<TriMesh>(build_unit_square_mesh(1 << config.fine_level)));
  const SemilinearSystem fine_system(fine, identity_basis(fine.dim()), problem, quad);
  const NewtonResult fine_result = damped_newton(fine_system, newton_config_of(config));
  if (!fine_result.converged)
    throw std::runtime_error("run_convergence: the fine reference solve did not converge");
  const Vector u_ref = fine_result.alpha;

  ConvergenceReport report;
  report.epsilon = config.epsilon;
  report.fine_level = config.fine_level;
  report.linear = config.linear;
  report.corrector = config.corrector;
  report.fine_newton_iterations = fine_result.iterations;
  report.fine_residual_norms = fine_result.residual_norms;
  report.fine_step_sizes = fine_result.step_sizes;
  std::tie(report.fine_min, report.fine_max) = detail::nodal_range(u_ref);

  for (size_t i = 0; i < config.coarse_levels.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    ConvergenceRow row;
    row.H = std::ldexp(1.0, -config.coarse_levels[i]);
    row.coarse_layers = schedule[i];
    row.fine_layers = steps[i];
    try {
      const FeSpace coarse(
          std::make_shared<TriMesh>(build_unit_square_mesh(1 << config.coarse_levels[i])));
      const ClementOperator clement = build_clement(coarse, fine, coarse_quad);
      const MultiscaleBasis basis =
          config.corrector == "element"
              ? build_ms_basis_by_element(coarse, fine, fine_system.stiffness(), clement, quad,
                                          problem.diffusion, schedule[i], steps[i], config.threads)
              : build_ms_basis(coarse, fine, fine_system.stiffness(), clement, schedule[i],
                               config.threads);
      const SemilinearSystem ms_system(fine, basis.basis, problem, quad);
      const NewtonResult ms_result = damped_newton(ms_system, newton_config_of(config));
      if (!ms_result.converged)
        throw std::runtime_error("multiscale Newton solve did not converge within " +
                                 std::to_string(config.max_iterations) + " iterations");
      const Vector diff = basis.basis * ms_result.alpha - u_ref;
      row.l2_error = l2_norm(fine, diff);
      row.h1_seminorm = h1_seminorm(fine, diff);
      row.h1_error = row.l2_error + row.h1_seminorm;
      row.newton_iterations = ms_result.iterations;
    } catch (const std::exception& e) {
      row.failed = true;
      row.failure = e.what();
    }
    row.wall_time = detail::seconds_since(start);
    report.rows.push_back(std::move(row));
  }

  double sum_l2 = 0.0, sum_h1 = 0.0;
  int count = 0;
  for (size_t i = 1; i < report.rows.size(); ++i) {
    ConvergenceRow& cur = report.rows[i];
    const ConvergenceRow& prev = report.rows[i - 1];
    if (cur.failed || prev.failed || !(prev.H > cur.H)) continue;
    if (!(cur.l2_error > 0.0) || !(prev.l2_error > 0.0)) continue;
    const double ratio = std::log(prev.H / cur.H);
    cur.eoc_l2 = std::log(prev.l2_error / cur.l2_error) / ratio;
    cur.eoc_h1 = std::log(prev.h1_error / cur.h1_error) / ratio;
    sum_l2 += cur.eoc_l2;
    sum_h1 += cur.eoc_h1;
    ++count;
  }
  if (count > 0) {
    report.avg_eoc_l2 = sum_l2 / count;
    report.avg_eoc_h1 = sum_h1 / count;
  }
  return report;
}

struct DecayRow {
  int node = 0;  // fine-independent coarse vertex index
  double k = 0.0;
  double tail_energy = 0.0;
  double fitted_theta = 0.0;
};

struct DecayReport {
  int coarse_level = 0;
  int fine_level = 0;
  std::vector<DecayRow> rows;
  std::vector<DecayProfile> profiles;
};

// Deterministic sample of up to `limit` interior coarse vertices, spread
// evenly over the interior index range.
inline std::vector<int> sample_interior_vertices(const FeSpace& coarse, int limit) {
  if (limit < 1) throw std::invalid_argument("sample_interior_vertices: limit must be positive");
  std::vector<int> all;
  for (int j = 0; j < coarse.dim(); ++j) all.push_back(coarse.vertex_of_dof(j));
  if (static_cast<int>(all.size()) <= limit) return all;
  if (limit == 1) return {all.front()};
  std::vector<int> picked;
  for (int i = 0; i < limit; ++i)
    picked.push_back(all[static_cast<size_t>(i) * (all.size() - 1) / (limit - 1)]);
  return picked;
}

// Corrector energy tails for sampled nodes of the first configured coarse
// level, with half-layer resolution up to patch saturation.
inline DecayReport run_decay_study(const ExperimentConfig& config, int node_limit = 8) {
  validate(config);
  const SemilinearProblem problem = benchmark_problem(config.epsilon, false);
  const QuadratureRule quad = triangle_gauss3(config.quad_subdivision);
  const FeSpace fine(std::make_shared<TriMesh>(build_unit_square_mesh(1 << config.fine_level)));
  const FeSpace coarse(
      std::make_shared<TriMesh>(build_unit_square_mesh(1 << config.coarse_levels.front())));
  const SparseMatrix stiffness = assemble_stiffness(fine, problem.diffusion, quad);
  const ClementOperator clement = build_clement(coarse, fine, triangle_gauss3(1));

  DecayReport report;
  report.coarse_level = config.coarse_levels.front();
  report.fine_level = config.fine_level;
  for (int node : sample_interior_vertices(coarse, node_limit)) {
    std::vector<double> ks;
    for (double k = 1.0;; k += 0.5) {
      ks.push_back(k);
      if (nodal_patch(coarse.mesh(), fine.mesh(), node, k).covers_domain) break;
      if (k > 4.0 * (1 << config.coarse_levels.front())) break;  // defensive cap
    }
    DecayProfile profile =
        decay_profile(coarse, fine, stiffness, problem.diffusion, quad, clement, node, ks);
    for (size_t i = 0; i < profile.layer_counts.size(); ++i)
      report.rows.push_back(
          {node, profile.layer_counts[i], profile.tail_energies[i], profile.theta});
    report.profiles.push_back(std::move(profile));
  }
  return report;
}

struct SolveReport {
  std::string space;  // "fine" or "ms"
  NewtonResult result;
  double solution_min = 0.0, solution_max = 0.0;
  double wall_time = 0.0;
};

// One Newton solve of the benchmark problem, either directly on the fine
// space or through the multiscale basis of the first coarse level.
inline SolveReport run_solve(const ExperimentConfig& config, bool multiscale) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const SemilinearProblem problem = benchmark_problem(config.epsilon, !config.linear);
  const QuadratureRule quad = triangle_gauss3(config.quad_subdivision);
  const FeSpace fine(std::make_shared<TriMesh>(build_unit_square_mesh(1 << config.fine_level)));

  SolveReport report;
  Vector u;
  if (multiscale) {
    const FeSpace coarse(
        std::make_shared<TriMesh>(build_unit_square_mesh(1 << config.coarse_levels.front())));
    const SparseMatrix stiffness = assemble_stiffness(fine, problem.diffusion, quad);
    const ClementOperator clement = build_clement(coarse, fine, triangle_gauss3(1));
    const std::vector<double> schedule = resolve_layer_schedule(config);
    const MultiscaleBasis basis =
        config.corrector == "element"
            ? build_ms_basis_by_element(coarse, fine, stiffness, clement, quad, problem.diffusion,
                                        schedule.front(),
                                        resolve_fine_steps(config, schedule).front(),
                                        config.threads)
            : build_ms_basis(coarse, fine, stiffness, clement, schedule.front(), config.threads);
    const SemilinearSystem system(fine, basis.basis, problem, quad);
    report.result = damped_newton(system, newton_config_of(config));
    u = basis.basis * report.result.alpha;
    report.space = "ms";
  } else {
    const SemilinearSystem system(fine, identity_basis(fine.dim()), problem, quad);
    report.result = damped_newton(system, newton_config_of(config));
    u = report.result.alpha;
    report.space = "fine";
  }
  std::tie(report.solution_min, report.solution_max) = detail::nodal_range(u);
  report.wall_time = detail::seconds_since(start);
  return report;
}

// ---- output formatting ----------------------------------------------------

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void write_convergence_csv(const ConvergenceReport& report, std::ostream& os) {
  os << "H,coarse_layers,fine_layers,l2_error,h1_error,eoc_l2,eoc_h1,newton_iterations,wall_time\n";
  for (const auto& row : report.rows) {
    if (row.failed) continue;
    os << format_number(row.H) << ',' << format_number(row.coarse_layers) << ',' << row.fine_layers
       << ',' << format_number(row.l2_error) << ',' << format_number(row.h1_error) << ','
       << format_number(row.eoc_l2) << ',' << format_number(row.eoc_h1) << ','
       << row.newton_iterations << ',' << format_number(row.wall_time) << '\n';
  }
}

inline void write_convergence_json(const ConvergenceReport& report, std::ostream& os) {
  nlohmann::json j;
  j["epsilon"] = report.epsilon;
  j["fine_level"] = report.fine_level;
  j["linear"] = report.linear;
  j["corrector"] = report.corrector;
  j["fine_newton_iterations"] = report.fine_newton_iterations;
  j["fine_solution_range"] = {report.fine_min, report.fine_max};
  if (!std::isnan(report.avg_eoc_l2)) {
    j["average_eoc_l2"] = report.avg_eoc_l2;
    j["average_eoc_h1"] = report.avg_eoc_h1;
  }
  j["rows"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["H"] = row.H;
    r["coarse_layers"] = row.coarse_layers;
    if (row.failed) {
      r["failed"] = true;
      r["reason"] = row.failure;
    } else {
      r["fine_layers"] = row.fine_layers;
      r["l2_error"] = row.l2_error;
      r["h1_error"] = row.h1_error;
      r["h1_seminorm"] = row.h1_seminorm;
      if (!std::isnan(row.eoc_l2)) {
        r["eoc_l2"] = row.eoc_l2;
        r["eoc_h1"] = row.eoc_h1;
      }
      r["newton_iterations"] = row.newton_iterations;
      r["wall_time"] = row.wall_time;
    }
    j["rows"].push_back(std::move(r));
  }
  os << j.dump(2) << '\n';
}

inline void write_decay_csv(const DecayReport& report, std::ostream& os) {
  os << "node,k,tail_energy,fitted_theta\n";
  for (const auto& row : report.rows)
    os << row.node << ',' << format_number(row.k) << ',' << format_number(row.tail_energy) << ','
       << format_number(row.fitted_theta) << '\n';
}

inline void write_decay_json(const DecayReport& report, std::ostream& os) {
  nlohmann::json j;
  j["coarse_level"] = report.coarse_level;
  j["fine_level"] = report.fine_level;
  j["nodes"] = nlohmann::json::array();
  for (const auto& profile : report.profiles) {
    nlohmann::json n;
    n["node"] = profile.coarse_vertex;
    n["k"] = profile.layer_counts;
    n["tail_energy"] = profile.tail_energies;
    n["fitted_theta"] = profile.theta;
    n["r_squared"] = profile.r_squared;
    j["nodes"].push_back(std::move(n));
  }
  os << j.dump(2) << '\n';
}

inline void write_history_csv(const NewtonResult& result, std::ostream& os) {
  os << "iter,residual_norm,zeta\n";
  for (size_t i = 0; i < result.residual_norms.size(); ++i) {
    os << i << ',' << format_number(result.residual_norms[i]) << ',';
    if (i > 0) os << format_number(result.step_sizes[i - 1]);
    os << '\n';
  }
}

inline void write_solve_json(const SolveReport& report, std::ostream& os) {
  nlohmann::json j;
  j["space"] = report.space;
  j["converged"] = report.result.converged;
  j["iterations"] = report.result.iterations;
  j["residual_norms"] = report.result.residual_norms;
  j["step_sizes"] = report.result.step_sizes;
  j["solution_range"] = {report.solution_min, report.solution_max};
  j["wall_time"] = report.wall_time;
  os << j.dump(2) << '\n';
}

}  // namespace lod
