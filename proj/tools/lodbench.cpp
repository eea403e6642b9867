// Command-line driver for the multiscale benchmark: convergence tables
// against a fine reference, corrector-decay profiles, and single solves
// with iteration histories.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <ostream>
#include <string>

#include "lod/bench.hpp"

namespace {

// Run `writer` on the requested output stream; 0 on success, 2 when the
// output file cannot be opened.
int with_output(const std::string& path, const std::function<void(std::ostream&)>& writer) {
  if (path.empty()) {
    writer(std::cout);
    return 0;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot open output file '" << path << "'\n";
    return 2;
  }
  writer(out);
  return 0;
}

struct ScheduleOptions {
  CLI::Option* fine_level = nullptr;
  CLI::Option* levels = nullptr;
  CLI::Option* layers = nullptr;
  CLI::Option* multiplier = nullptr;
  CLI::Option* widths = nullptr;
};

std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Apply `key=value` lines to the options of `cmd` that were not given on the
// command line.  '#' starts a comment; list values are whitespace separated.
// Injected values go through the options' own converters and validators.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config file '" + path + "' cannot be read");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(where + ": expected key=value");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (key.empty() || key == "config")
      throw std::runtime_error(where + ": invalid key '" + key + "'");
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) throw std::runtime_error(where + ": unknown option '" + key + "'");
    if (opt->count() > 0) continue;  // command line wins
    std::istringstream parts(value);
    std::string token;
    bool any = false;
    while (parts >> token) {
      opt->add_result(token);
      any = true;
    }
    if (!any) throw std::runtime_error(where + ": empty value for '" + key + "'");
    opt->run_callback();
  }
}

ScheduleOptions add_experiment_options(CLI::App* cmd, lod::ExperimentConfig& cfg,
                                       std::string& config_path, bool basis_options) {
  ScheduleOptions o;
  cmd->add_option("--epsilon", cfg.epsilon, "Oscillation length of the diffusion coefficient")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  o.fine_level = cmd->add_option("--fine-level", cfg.fine_level,
                                 "Reference mesh level; h = 2^-level")
                     ->capture_default_str();
  o.levels = cmd->add_option("--coarse-levels", cfg.coarse_levels,
                             "Coarse mesh levels, one table row each; H = 2^-level")
                 ->capture_default_str();
  o.layers = cmd->add_option("--layers", cfg.layers,
                             "Patch widths in coarse layers (one value or one per row)")
                 ->capture_default_str();
  o.multiplier = cmd->add_option("--layer-multiplier", cfg.layer_multiplier,
                                 "Derive the widths as multiplier * log(1/H), rounded to half "
                                 "layers; overrides --layers")
                     ->capture_default_str();
  if (basis_options) {
    cmd->add_option("--corrector", cfg.corrector, "Corrector assembly: element or nodal")
        ->check(CLI::IsMember({"element", "nodal"}))
        ->capture_default_str();
    o.widths = cmd->add_option(
                      "--fine-layers", cfg.fine_layers,
                      "Element-patch widths in fine layers (one value or one per row).  The "
                      "default pairs with the default schedule; customizing the schedule "
                      "without this option derives round(layers * H/h)")
                   ->capture_default_str();
    cmd->add_flag("--linear", cfg.linear, "Drop the reaction term");
  }
  cmd->add_option("--quad-subdiv", cfg.quad_subdivision,
                  "Uniform subdivision per triangle for the quadrature rule")
      ->capture_default_str();
  cmd->add_option("--abstol", cfg.abstol, "Newton absolute residual tolerance")
      ->capture_default_str();
  cmd->add_option("--reltol", cfg.reltol, "Newton relative residual tolerance")
      ->capture_default_str();
  cmd->add_option("--max-iterations", cfg.max_iterations, "Newton iteration cap")
      ->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "Worker threads for corrector solves (0 = hardware)")
      ->capture_default_str();
  cmd->add_option("--out", cfg.out, "Output path (default stdout)");
  cmd->add_option("--format", cfg.format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  cmd->add_option("--config", config_path,
                  "Read options from a key=value file (command line wins)");
  return o;
}

// The default fine-layer widths pair with the default schedule.  Whenever the
// schedule is customized without explicit widths, or the nodal corrector is
// requested, fall back to the derived rule.
void resolve_width_defaults(const ScheduleOptions& o, lod::ExperimentConfig& cfg) {
  const bool custom = o.fine_level->count() || o.levels->count() || o.layers->count() ||
                      o.multiplier->count();
  if (!o.widths->count() && (custom || cfg.corrector != "element")) cfg.fine_layers.clear();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale finite-element benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lodbench 1.0");

  lod::ExperimentConfig cfg;
  cfg.fine_layers = {24, 16, 12, 8};  // reference widths for the default schedule
  std::string config_path;
  int exit_code = 0;

  CLI::App* conv = app.add_subcommand(
      "convergence", "Errors of the localized multiscale solves against the fine reference");
  const ScheduleOptions conv_opts = add_experiment_options(conv, cfg, config_path, true);
  conv->callback([&] {
    if (!config_path.empty()) apply_config_file(conv, config_path);
    resolve_width_defaults(conv_opts, cfg);
    const lod::ConvergenceReport report = lod::run_convergence(cfg);
    exit_code = with_output(cfg.out, [&](std::ostream& os) {
      if (cfg.format == "json")
        lod::write_convergence_json(report, os);
      else
        lod::write_convergence_csv(report, os);
    });
    if (exit_code == 0 && report.any_failed()) {
      for (const auto& row : report.rows)
        if (row.failed) std::cerr << "row H=" << row.H << " failed: " << row.failure << "\n";
      exit_code = 1;
    }
  });

  CLI::App* decay = app.add_subcommand(
      "decay", "Corrector energy tails over the patch width on the first coarse level");
  add_experiment_options(decay, cfg, config_path, false);
  decay->callback([&] {
    if (!config_path.empty()) apply_config_file(decay, config_path);
    cfg.fine_layers.clear();  // the decay study always derives nodal patches
    const lod::DecayReport report = lod::run_decay_study(cfg);
    exit_code = with_output(cfg.out, [&](std::ostream& os) {
      if (cfg.format == "json")
        lod::write_decay_json(report, os);
      else
        lod::write_decay_csv(report, os);
    });
  });

  CLI::App* solve =
      app.add_subcommand("solve", "One damped Newton solve with its iteration history");
  std::string space = "fine";
  const ScheduleOptions solve_opts = add_experiment_options(solve, cfg, config_path, true);
  solve->add_option("--space", space, "Solution space: fine or ms")
      ->check(CLI::IsMember({"fine", "ms"}))
      ->capture_default_str();
  solve->callback([&] {
    if (!config_path.empty()) apply_config_file(solve, config_path);
    resolve_width_defaults(solve_opts, cfg);
    const lod::SolveReport report = lod::run_solve(cfg, space == "ms");
    exit_code = with_output(cfg.out, [&](std::ostream& os) {
      if (cfg.format == "json")
        lod::write_solve_json(report, os);
      else
        lod::write_history_csv(report.result, os);
    });
    if (exit_code == 0 && !report.result.converged) {
      std::cerr << "solve did not converge within " << cfg.max_iterations << " iterations\n";
      exit_code = 1;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
