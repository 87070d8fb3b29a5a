#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decsim/config.hpp"
#include "decsim/dataset.hpp"
#include "decsim/disruption.hpp"
#include "decsim/metrics.hpp"
#include "decsim/topology.hpp"

namespace decsim {

std::string_view version_string();

struct DataBundle {
  Dataset train;
  Dataset test;
};

/// Loads (or generates) the training pool and the common test set.
DataBundle load_data(const DataSource& source);

/// One entry of the per-round log kept for causality checks.
struct RoundEvent {
  enum class Kind { train, skip, aggregate, evaluate, trigger, disrupt };
  int round = 0;
  Kind kind = Kind::train;
  NodeId node = -1;
  std::vector<NodeId> inputs;  // aggregate: contributing nodes, ascending
};

struct RunRecord {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string config_hash;
  ExperimentConfig config;  // the single-run config (one seed, no sweep grid)
  MetricsFrame frame;
  DisruptionPlan plan;
  DisruptedNetwork network;
  NodeAssignment assignment;
  double wall_seconds = 0.0;
  std::vector<RoundEvent> events;
};

/// Synchronous DecAvg rounds for one repetition seed. Round 0 evaluates the
/// common initial model; each round t >= 1 then
///   1. trains every alive node with data on its local set,
///   2. replaces every alive node's model with the DecAvg average of the
///      round-t trained models of its alive neighbours and itself,
///   3. evaluates every alive node on the test set,
///   4. fires the disruption if the survivors' mean accuracy reached the
///      threshold; removal takes effect from round t + 1.
/// A threshold of 0 fires at round 0, before any training.
RunRecord run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                         const DataBundle& data);
RunRecord run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

/// Expands the sweep grid (cases x thresholds x case-3 survivor counts) into
/// single-scenario configs. A config without a grid expands to itself.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg);

struct RunFailure {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string message;
};

struct SweepResult {
  std::vector<RunRecord> records;  // config order, then seed order
  std::vector<RunFailure> failures;
};

/// Runs every config for each of its seeds, up to `threads` at a time. A
/// failing run is recorded and the sweep continues.
SweepResult run_sweep(std::span<const ExperimentConfig> cfgs, std::size_t threads = 1);

/// Writes per-run CSVs, disruption records, aggregate.csv and manifest.json.
void write_sweep_outputs(const std::filesystem::path& dir, const SweepResult& result,
                         const ExperimentConfig& source_cfg, double wall_seconds);

struct PercolationReport {
  Graph graph;
  std::map<CentralityKind, CentralityMap> centralities;
  std::map<CentralityKind, std::vector<PercolationPoint>> curves;
  /// Component sizes after removing the configured fraction.
  std::map<CentralityKind, PercolationPoint> at_fraction;
};

PercolationReport percolation_report(const ExperimentConfig& cfg);
void write_percolation_report(const std::filesystem::path& dir, const PercolationReport& r,
                              const ExperimentConfig& cfg);

/// --out flag, then the DECSIM_OUTPUT_DIR environment variable, then the
/// config's run.output.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::optional<std::filesystem::path>& flag);

/// Runs fn(i) for i in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace decsim
