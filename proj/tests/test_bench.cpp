#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#include "lod/bench.hpp"

using lod::ExperimentConfig;
using lod::SemilinearProblem;
using lod::Vector;

namespace {

// Cubic Hermite interpolation in basis form, as an independent check of the
// monomial coefficients obtained from the linear system.
double hermite_oracle(double u) {
  const double ua = -1.25, width = 0.25;
  const double va = std::sqrt(7.0 / 8.0), da = 1.0 / (4.0 * std::sqrt(7.0 / 8.0));
  const double t = (u - ua) / width;
  const double h00 = (2.0 * t - 3.0) * t * t + 1.0;
  const double h10 = ((t - 2.0) * t + 1.0) * t;
  return va * h00 + da * width * h10;  // right value and slope are zero
}

ExperimentConfig smoke_config() {
  ExperimentConfig c;
  c.fine_level = 4;
  c.coarse_levels = {2, 3};
  c.layers = {1.0, 1.5};
  c.quad_subdivision = 2;
  return c;
}

// Strips the final column (wall_time) from every CSV line.
std::string strip_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string out, line;
  while (std::getline(in, line)) {
    out += line.substr(0, line.rfind(','));
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("the cubic bridge matches Hermite interpolation and joins smoothly") {
  const lod::SaturationProfile s;
  for (double u = -1.25; u <= -1.0 + 1e-12; u += 0.01)
    REQUIRE(s.value(u) == Catch::Approx(hermite_oracle(u)).margin(1e-12));

  // Left junction: value and slope continue the square-root branch.
  REQUIRE(s.value(-1.25) == Catch::Approx(std::sqrt(7.0 / 8.0)).margin(1e-12));
  const double left_slope = 0.25 / std::sqrt(0.5 * -1.25 + 1.5);
  REQUIRE(s.derivative(-1.25) == Catch::Approx(left_slope).margin(1e-12));
  REQUIRE(s.value(-1.25 - 1e-9) == Catch::Approx(s.value(-1.25)).margin(1e-8));

  // Right junction: flattens to zero with zero slope.
  REQUIRE(s.value(-1.0) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(s.derivative(-1.0) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(s.value(-0.999) == 0.0);

  // Outer behavior: zero above -1, zero at and below -3, nonnegative inside.
  REQUIRE(s.value(0.0) == 0.0);
  REQUIRE(s.value(-3.0) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(s.value(-4.0) == 0.0);
  for (double u = -2.99; u < 0.0; u += 0.037) REQUIRE(s.value(u) >= 0.0);

  // Central differences confirm the derivative away from the junctions.
  for (double u : {-2.5, -1.6, -1.31, -1.15, -1.05, -0.5}) {
    const double fd = (s.value(u + 1e-6) - s.value(u - 1e-6)) / 2e-6;
    REQUIRE(s.derivative(u) == Catch::Approx(fd).margin(1e-7));
  }
}

TEST_CASE("the oscillatory diffusion has the expected spectrum") {
  const SemilinearProblem p = lod::benchmark_problem(0.05);
  const double pref = 1.0 / (8.0 * M_PI * M_PI);

  const Eigen::Matrix2d at_zero = p.diffusion(Eigen::Vector2d(0.0, 0.3));
  REQUIRE(at_zero(0, 0) == Catch::Approx(pref * 2.0 / 3.0).margin(1e-15));
  REQUIRE(at_zero(1, 1) == Catch::Approx(pref * 1.5).margin(1e-15));
  REQUIRE(at_zero(0, 1) == 0.0);
  REQUIRE(at_zero(1, 0) == 0.0);

  for (int i = 0; i <= 200; ++i) {
    const Eigen::Vector2d x(i / 200.0, 0.5);
    const Eigen::Matrix2d a = p.diffusion(x);
    const double lo = std::min(a(0, 0), a(1, 1));
    const double hi = std::max(a(0, 0), a(1, 1));
    REQUIRE(lo >= p.ellipticity_lower - 1e-15);
    REQUIRE(hi <= p.ellipticity_upper + 1e-15);
  }
}

TEST_CASE("the reaction vanishes at zero and respects its Lipschitz bounds") {
  const SemilinearProblem p = lod::benchmark_problem(0.05);
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uval(-2.0, 0.0), ugrad(-3.0, 3.0);

  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector2d x(ux(rng), ux(rng));
    const Eigen::Vector2d z(ugrad(rng), ugrad(rng));
    REQUIRE(p.reaction(x, 0.0, z) == 0.0);

    const double xi1 = uval(rng), xi2 = uval(rng);
    const double value_gap = std::abs(p.reaction(x, xi1, z) - p.reaction(x, xi2, z));
    REQUIRE(value_gap <= p.lipschitz_value * std::abs(xi1 - xi2) * (1.0 + z.norm()) + 1e-14);

    const Eigen::Vector2d z2(ugrad(rng), ugrad(rng));
    const double grad_gap = std::abs(p.reaction(x, xi1, z) - p.reaction(x, xi1, z2));
    REQUIRE(grad_gap <= p.lipschitz_gradient * (z - z2).norm() + 1e-14);
  }
}

TEST_CASE("reaction derivatives agree with central differences") {
  const SemilinearProblem p = lod::benchmark_problem(0.05);
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uval(-1.9, -0.1), ugrad(-2.0, 2.0);
  int checked = 0;
  while (checked < 100) {
    const double u = uval(rng);
    // Stay clear of the branch junctions where one-sided smoothness ends.
    if (std::abs(u + 1.25) < 1e-2 || std::abs(u + 1.0) < 1e-2) continue;
    const Eigen::Vector2d x(ux(rng), ux(rng));
    const Eigen::Vector2d z(ugrad(rng), ugrad(rng));
    const double fd_u = (p.reaction(x, u + 1e-6, z) - p.reaction(x, u - 1e-6, z)) / 2e-6;
    REQUIRE(p.reaction_du(x, u, z) == Catch::Approx(fd_u).margin(1e-6));
    const Eigen::Vector2d dz(0.0, 1e-6);
    const double fd_g = (p.reaction(x, u, z + dz) - p.reaction(x, u, z - dz)) / 2e-6;
    REQUIRE(p.reaction_dgrad(x, u, z).y() == Catch::Approx(fd_g).margin(1e-9));
    REQUIRE(p.reaction_dgrad(x, u, z).x() == 0.0);
    ++checked;
  }
}

TEST_CASE("experiment configuration is validated") {
  ExperimentConfig c = smoke_config();
  REQUIRE_NOTHROW(lod::validate(c));
  c.epsilon = 0.0;
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
  c = smoke_config();
  c.coarse_levels.clear();
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
  c = smoke_config();
  c.coarse_levels = {4};
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
  c = smoke_config();
  c.layers = {1.0, 1.5, 2.0};
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
  c = smoke_config();
  c.layers = {1.3, 1.5};
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
  c = smoke_config();
  c.layers = {0.5};
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
  c = smoke_config();
  c.format = "xml";
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
  c = smoke_config();
  c.quad_subdivision = 0;
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
  c = smoke_config();
  c.abstol = 0.0;
  REQUIRE_THROWS_AS(lod::validate(c), std::invalid_argument);
}

TEST_CASE("layer schedules resolve from lists and from the log formula") {
  ExperimentConfig c;
  c.coarse_levels = {2, 3, 4, 5};
  c.layers = {1.5, 2.0, 2.5, 3.0};
  REQUIRE(lod::resolve_layer_schedule(c) == std::vector<double>{1.5, 2.0, 2.5, 3.0});

  c.layers = {2.0};  // single value broadcasts
  REQUIRE(lod::resolve_layer_schedule(c) == std::vector<double>{2.0, 2.0, 2.0, 2.0});

  c.layer_multiplier = 1.0;  // k = log(1/H) rounded to the nearest half layer
  REQUIRE(lod::resolve_layer_schedule(c) == std::vector<double>{1.5, 2.0, 3.0, 3.5});
}

TEST_CASE("a small convergence study produces decreasing errors and orders") {
  const ExperimentConfig c = smoke_config();
  const auto report = lod::run_convergence(c);
  REQUIRE(report.rows.size() == 2);
  REQUIRE_FALSE(report.any_failed());
  for (const auto& row : report.rows) {
    REQUIRE(row.l2_error > 0.0);
    REQUIRE(row.h1_error > row.l2_error);
    REQUIRE(row.h1_error == Catch::Approx(row.l2_error + row.h1_seminorm));
    REQUIRE(row.newton_iterations >= 1);
  }
  REQUIRE(report.rows[0].H == 0.25);
  REQUIRE(report.rows[1].H == 0.125);
  REQUIRE(report.rows[0].fine_layers == 4);   // k=1 at H/h = 4
  REQUIRE(report.rows[1].fine_layers == 3);   // k=1.5 at H/h = 2
  REQUIRE(std::isnan(report.rows[0].eoc_l2));
  REQUIRE_FALSE(std::isnan(report.rows[1].eoc_l2));
  REQUIRE(report.rows[1].l2_error < report.rows[0].l2_error);
  REQUIRE(report.rows[1].h1_error < report.rows[0].h1_error);
  REQUIRE_FALSE(std::isnan(report.avg_eoc_l2));
  std::cout << "smoke study errors: " << report.rows[0].l2_error << " " << report.rows[1].l2_error
            << " eoc_l2=" << report.rows[1].eoc_l2 << " eoc_h1=" << report.rows[1].eoc_h1 << "\n";
  std::cout << "fine solution range: [" << report.fine_min << ", " << report.fine_max << "]\n";
  REQUIRE(report.fine_min > -2.5);
  REQUIRE(report.fine_max < 0.5);

  // The fine reference solve obeyed the damped acceptance rule throughout.
  const auto& r = report.fine_residual_norms;
  const auto& z = report.fine_step_sizes;
  REQUIRE(r.size() == z.size() + 1);
  for (size_t i = 0; i < z.size(); ++i) REQUIRE(r[i + 1] < (1.0 - 0.5 * z[i]) * r[i]);
}

TEST_CASE("a single coarse level leaves the order columns empty") {
  ExperimentConfig c = smoke_config();
  c.coarse_levels = {3};
  c.layers = {1.0};
  const auto report = lod::run_convergence(c);
  REQUIRE(report.rows.size() == 1);
  REQUIRE(std::isnan(report.rows[0].eoc_l2));
  REQUIRE(std::isnan(report.avg_eoc_l2));

  std::ostringstream csv;
  lod::write_convergence_csv(report, csv);
  std::istringstream lines(csv.str());
  std::string header, row;
  std::getline(lines, header);
  REQUIRE(header == "H,coarse_layers,fine_layers,l2_error,h1_error,eoc_l2,eoc_h1,newton_iterations,wall_time");
  std::getline(lines, row);
  REQUIRE(row.find(",,,") != std::string::npos);  // adjacent empty order fields
}

TEST_CASE("identical configurations produce identical tables") {
  const ExperimentConfig c = smoke_config();
  std::ostringstream first, second;
  lod::write_convergence_csv(lod::run_convergence(c), first);
  lod::write_convergence_csv(lod::run_convergence(c), second);
  REQUIRE(strip_last_column(first.str()) == strip_last_column(second.str()));
  REQUIRE(first.str().substr(0, first.str().find('\n')) ==
          "H,coarse_layers,fine_layers,l2_error,h1_error,eoc_l2,eoc_h1,newton_iterations,wall_time");
}

TEST_CASE("numbers are written with six significant digits") {
  REQUIRE(lod::format_number(0.25) == "0.25");
  REQUIRE(lod::format_number(0.123456789) == "0.123457");
  REQUIRE(lod::format_number(1234567.0) == "1.23457e+06");
  REQUIRE(lod::format_number(0.0) == "0");
  REQUIRE(lod::format_number(std::numeric_limits<double>::quiet_NaN()).empty());
}

TEST_CASE("decay studies cover every sampled node up to saturation") {
  ExperimentConfig c = smoke_config();
  const auto report = lod::run_decay_study(c);
  REQUIRE(report.coarse_level == 2);
  REQUIRE(report.profiles.size() == 8);  // nine interior nodes, capped at eight
  for (const auto& profile : report.profiles) {
    REQUIRE(profile.layer_counts.front() == 1.0);
    REQUIRE(profile.tail_energies.back() == 0.0);  // saturated patch leaves no tail
    for (size_t i = 1; i < profile.tail_energies.size(); ++i)
      REQUIRE(profile.tail_energies[i] <= profile.tail_energies[i - 1] * (1.0 + 1e-12));
    REQUIRE(profile.theta > 0.0);
    REQUIRE(profile.theta < 1.0);
  }

  std::ostringstream csv;
  lod::write_decay_csv(report, csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  REQUIRE(line == "node,k,tail_energy,fitted_theta");
  size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  REQUIRE(rows == report.rows.size());
}

TEST_CASE("higher-contrast diffusion slows the corrector decay") {
  const auto fine = lod::FeSpace(std::make_shared<lod::TriMesh>(lod::build_unit_square_mesh(32)));
  const auto coarse = lod::FeSpace(std::make_shared<lod::TriMesh>(lod::build_unit_square_mesh(8)));
  const auto identity = [](const Eigen::Vector2d&) { return Eigen::Matrix2d::Identity().eval(); };
  const auto contrast = [](const Eigen::Vector2d& x) {
    const int i = static_cast<int>(std::floor(x.x() * 16.0));
    const int j = static_cast<int>(std::floor(x.y() * 16.0));
    const double v = ((i + j) % 2 == 0) ? 100.0 : 1.0;
    return (v * Eigen::Matrix2d::Identity()).eval();
  };
  const auto quad = lod::triangle_gauss3(2);
  const auto op = lod::build_clement(coarse, fine, lod::triangle_gauss3(1));
  const int node = coarse.mesh().vertex_index(4, 4);
  const std::vector<double> ks{1.0, 2.0, 3.0, 4.0, 5.0};
  const auto plain = lod::decay_profile(coarse, fine, lod::assemble_stiffness(fine, identity, quad),
                                        identity, quad, op, node, ks);
  const auto rough = lod::decay_profile(coarse, fine, lod::assemble_stiffness(fine, contrast, quad),
                                        contrast, quad, op, node, ks);
  std::cout << "theta identity=" << plain.theta << " contrast=" << rough.theta << "\n";
  REQUIRE(plain.theta < 1.0);
  REQUIRE(rough.theta < 1.0);
  REQUIRE(rough.theta > plain.theta);
}

TEST_CASE("single solves emit an iteration history") {
  ExperimentConfig c;
  c.fine_level = 4;
  c.coarse_levels = {2};
  c.layers = {1.0};
  c.quad_subdivision = 2;

  for (bool multiscale : {false, true}) {
    const auto report = lod::run_solve(c, multiscale);
    REQUIRE(report.result.converged);
    REQUIRE(report.space == (multiscale ? "ms" : "fine"));
    REQUIRE(report.result.iterations >= 1);
    REQUIRE(report.solution_min < 0.0);

    std::ostringstream csv;
    lod::write_history_csv(report.result, csv);
    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line);
    REQUIRE(line == "iter,residual_norm,zeta");
    std::getline(lines, line);
    REQUIRE(line.rfind("0,", 0) == 0);
    REQUIRE(line.back() == ',');  // no step size before the first update
    size_t rows = 1;
    while (std::getline(lines, line)) ++rows;
    REQUIRE(rows == report.result.residual_norms.size());
  }
}

TEST_CASE("JSON outputs parse and carry the study fields") {
  ExperimentConfig c = smoke_config();
  const auto report = lod::run_convergence(c);
  std::ostringstream conv;
  lod::write_convergence_json(report, conv);
  const auto j = nlohmann::json::parse(conv.str());
  REQUIRE(j["epsilon"] == 0.05);
  REQUIRE(j["rows"].size() == 2);
  REQUIRE(j["rows"][0].contains("l2_error"));
  REQUIRE(j["rows"][1].contains("eoc_l2"));
  REQUIRE_FALSE(j["rows"][0].contains("eoc_l2"));
  REQUIRE(j["rows"][0].contains("h1_seminorm"));
  REQUIRE(j.contains("average_eoc_l2"));
  REQUIRE(j["fine_solution_range"].size() == 2);

  std::ostringstream decay;
  lod::write_decay_json(lod::run_decay_study(c, 2), decay);
  const auto dj = nlohmann::json::parse(decay.str());
  REQUIRE(dj["nodes"].size() == 2);
  REQUIRE(dj["nodes"][0].contains("fitted_theta"));

  std::ostringstream solve;
  lod::write_solve_json(lod::run_solve(c, false), solve);
  const auto sj = nlohmann::json::parse(solve.str());
  REQUIRE(sj["converged"] == true);
  REQUIRE(sj["space"] == "fine");
}
