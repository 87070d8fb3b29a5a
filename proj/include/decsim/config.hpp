#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decsim/dataset.hpp"
#include "decsim/learner.hpp"
#include "decsim/topology.hpp"

namespace decsim {

enum class DataCase { case1, case2, case3 };

std::string_view to_string(DataCase c);
DataCase parse_case(std::string_view name);

struct DataSource {
  enum class Kind { synthetic, idx };
  Kind kind = Kind::synthetic;

  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  /// Per-class share of the training pool kept (deterministic subsample).
  double train_fraction = 1.0;

  SyntheticSpec synthetic;          // per_class is the training draw size
  std::size_t synthetic_test_per_class = 100;

  /// Canonical description; equal strings load equal data.
  std::string key() const;
};

struct SweepGrid {
  std::vector<DataCase> cases;
  std::vector<std::optional<double>> thresholds;
  /// Case 3 learns faster and needs its own trigger levels; empty means
  /// `thresholds`.
  std::vector<std::optional<double>> case3_thresholds;
  std::vector<std::size_t> l2_per_class;
};

/// Everything needed to run one scenario (for every repetition seed).
///
/// Text form is INI-style: `[section]` headers and `key = value` lines; `#`
/// and `;` start comments. Unknown sections or keys are errors. See
/// configs/desk.ini for the full schema.
struct ExperimentConfig {
  BAParams topology{30, 2, 7};
  DataCase data_case = DataCase::case1;
  std::size_t case1_per_class = 7;
  std::size_t case2_per_class = 6;
  std::size_t case3_survivor_l2_per_class = 10;
  std::optional<LabelSplit> label_split;  // default: lower/upper halves
  CentralityKind centrality = CentralityKind::structural_hole;
  double disrupted_fraction = 0.1;
  std::optional<double> threshold;         // nullopt: never disrupt
  int rounds = 60;
  int eval_stride = 1;
  TrainConfig train;
  std::vector<std::size_t> hidden_sizes{64, 32};
  DataSource data;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "results";
  std::size_t threads = 1;
  SweepGrid sweep;
  double percolation_step = 0.01;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Resolved settings as flat "section.key" -> value text. Independent of
  /// the order keys appeared in the source file.
  std::map<std::string, std::string> canonical() const;
  /// 16 hex digits; stable under key reordering and formatting changes.
  std::string hash() const;
  /// Label shared by every repetition of this scenario.
  std::string run_id() const;
};

/// Relative data paths are resolved against `base_dir`.
ExperimentConfig parse_config(std::istream& in,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace decsim
