#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decsim/topology.hpp"

namespace decsim {

/// Per-round, per-node test accuracy of one run.
///
/// `survivor` marks the nodes that are never disrupted. `cluster_size` is the
/// size of a survivor's component after the disruption (0 for disrupted
/// nodes); runs that never fire carry the would-be labelling so they can be
/// compared node by node. Absent entries (disrupted nodes after the
/// disruption) are NaN.
struct MetricsFrame {
  std::size_t node_count = 0;
  std::vector<int> rounds;
  std::vector<std::vector<double>> accuracy;  // [row][node]
  std::vector<bool> survivor;
  std::vector<std::size_t> cluster_size;
  std::vector<int> component_id;
  std::optional<int> disruption_round;

  /// Row holding `round`; MetricError if that round was not evaluated.
  std::size_t row(int round) const;
  bool has_round(int round) const;
  /// MetricError if the entry is absent.
  double at(NodeId node, int round) const;

  std::vector<NodeId> survivors() const;
  std::vector<NodeId> cluster_members(std::size_t size) const;
  /// Distinct cluster sizes among survivors, ascending.
  std::vector<std::size_t> cluster_sizes() const;
  std::size_t largest_cluster_size() const;
};

/// Mean over all survivors.
double mean_accuracy(const MetricsFrame& f, int round);
/// Mean over the given nodes.
double mean_accuracy(const MetricsFrame& f, std::span<const NodeId> nodes, int round);
/// Mean over every survivor whose component has `size` nodes, pooled across
/// components of that size.
double cluster_mean_accuracy(const MetricsFrame& f, std::size_t size, int round);

/// A_a(k, round_a) / A_b(k, round_b) - 1.
double accuracy_difference_at(const MetricsFrame& a, int round_a, const MetricsFrame& b,
                              int round_b, NodeId node);
/// Mean of per-node differences over `nodes`.
double mean_accuracy_difference_at(const MetricsFrame& a, int round_a, const MetricsFrame& b,
                                   int round_b, std::span<const NodeId> nodes);

/// Differences with both frames evaluated `t` rounds after their own
/// disruption round.
double accuracy_difference(const MetricsFrame& a, const MetricsFrame& b, NodeId node, int t);
/// Mean over nodes surviving in both frames.
double mean_accuracy_difference(const MetricsFrame& a, const MetricsFrame& b, int t);
double mean_accuracy_difference(const MetricsFrame& a, const MetricsFrame& b,
                                std::span<const NodeId> nodes, int t);

/// Mean with a normal-approximation 95% interval half-width across
/// repetitions (0 for a single value).
struct Summary {
  double mean = 0.0;
  double ci95 = 0.0;
  std::size_t count = 0;
};
Summary summarize(std::span<const double> values);

struct RunLabel {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string case_name;
  std::optional<double> threshold;
};

/// run_id,seed,case,threshold,round,node_id,cluster_size,accuracy,component_id
void write_run_csv_header(std::ostream& out);
void write_run_csv(std::ostream& out, const RunLabel& label, const MetricsFrame& f);

/// Def. 1 / Def. 2 metrics of a group of repetitions, aligned on
/// round_after_disruption (plain round for runs that never disrupt).
/// Columns: run_id,round_after_disruption,metric_name,value,ci95,count
void write_aggregate_csv_header(std::ostream& out);
void write_aggregate_csv(std::ostream& out, const std::string& run_id,
                         std::span<const MetricsFrame> repetitions);

}  // namespace decsim
