// Command-line front end: simulate, baseline, sweep and percolation.
//
// Exit codes: 0 ok, 1 config error, 2 data error, 3 runtime error.

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "decsim/config.hpp"
#include "decsim/errors.hpp"
#include "decsim/runner.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDataError = 2, kRuntimeError = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t threads = 0;
};

std::optional<std::filesystem::path> out_flag(const Options& o) {
  if (o.out) return std::filesystem::path(*o.out);
  return std::nullopt;
}

int run_scenarios(const Options& o, bool baseline, bool sweep) {
  auto cfg = decsim::load_config(o.config);
  if (o.seed) cfg.seeds = {*o.seed};
  if (o.threads) cfg.threads = o.threads;
  std::vector<decsim::ExperimentConfig> cfgs;
  if (sweep) {
    cfgs = decsim::expand_sweep(cfg);
  } else {
    cfg.sweep = {};
    if (baseline) cfg.threshold.reset();
    cfgs.push_back(cfg);
  }
  const auto dir = decsim::resolve_output_dir(cfg, out_flag(o));

  const auto started = std::chrono::steady_clock::now();
  const auto result = decsim::run_sweep(cfgs, cfg.threads);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  decsim::write_sweep_outputs(dir, result, cfg, secs);

  for (const auto& rec : result.records) {
    const auto& f = rec.frame;
    std::cout << rec.run_id << " seed=" << rec.seed << " triggered_round="
              << (rec.plan.triggered_round ? std::to_string(*rec.plan.triggered_round) : "none")
              << " final_mean_accuracy=" << decsim::mean_accuracy(f, f.rounds.back()) << '\n';
  }
  for (const auto& fail : result.failures) {
    std::cerr << "run " << fail.run_id << " seed=" << fail.seed << " failed: " << fail.message
              << '\n';
  }
  std::cout << "results written to " << dir.string() << '\n';
  if (!result.failures.empty()) {
    // a single run reports its own error class; a sweep with failures is a runtime error
    return result.records.empty() && cfgs.size() == 1 ? kDataError : kRuntimeError;
  }
  return kOk;
}

int run_percolation(const Options& o) {
  const auto cfg = decsim::load_config(o.config);
  const auto dir = decsim::resolve_output_dir(cfg, out_flag(o));
  const auto report = decsim::percolation_report(cfg);
  decsim::write_percolation_report(dir, report, cfg);
  for (const auto& [kind, p] : report.at_fraction) {
    std::cout << decsim::to_string(kind) << ": phi=" << p.phi
              << " components=" << p.component_sizes.size()
              << " isolated=" << p.num_isolated() << '\n';
  }
  std::cout << "results written to " << dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralised learning under targeted node disruption"};
  app.set_version_flag("--version", std::string(decsim::version_string()));
  app.require_subcommand(1);

  Options opts;
  auto add_common = [&opts](CLI::App* cmd, bool with_seed) {
    cmd->add_option("--config", opts.config, "experiment config file")->required();
    cmd->add_option("--out", opts.out, "output directory (overrides DECSIM_OUTPUT_DIR)");
    if (with_seed) {
      cmd->add_option("--seed", opts.seed, "run a single repetition seed");
      cmd->add_option("--threads", opts.threads, "worker threads");
    }
  };
  auto* simulate = app.add_subcommand("simulate", "run the configured scenario");
  add_common(simulate, true);
  auto* baseline = app.add_subcommand("baseline", "run the configured case without disruption");
  add_common(baseline, true);
  auto* sweep = app.add_subcommand("sweep", "run every scenario of the [sweep] grid");
  add_common(sweep, true);
  auto* percolation = app.add_subcommand("percolation", "targeted-attack percolation analysis");
  add_common(percolation, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return run_scenarios(opts, false, false);
    if (*baseline) return run_scenarios(opts, true, false);
    if (*sweep) return run_scenarios(opts, false, true);
    if (*percolation) return run_percolation(opts);
  } catch (const decsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const decsim::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
