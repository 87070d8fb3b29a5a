#include "decsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "decsim/errors.hpp"
#include "decsim/text.hpp"

namespace decsim {

std::size_t MetricsFrame::row(int round) const {
  auto it = std::lower_bound(rounds.begin(), rounds.end(), round);
  if (it == rounds.end() || *it != round) {
    throw MetricError("round " + std::to_string(round) + " was not evaluated");
  }
  return static_cast<std::size_t>(it - rounds.begin());
}

bool MetricsFrame::has_round(int round) const {
  return std::binary_search(rounds.begin(), rounds.end(), round);
}

double MetricsFrame::at(NodeId node, int round) const {
  if (node < 0 || static_cast<std::size_t>(node) >= node_count) {
    throw MetricError("node " + std::to_string(node) + " out of range");
  }
  const double a = accuracy[row(round)][static_cast<std::size_t>(node)];
  if (std::isnan(a)) {
    throw MetricError("node " + std::to_string(node) + " has no accuracy at round " +
                      std::to_string(round));
  }
  return a;
}

std::vector<NodeId> MetricsFrame::survivors() const {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < node_count; ++v) {
    if (survivor[v]) out.push_back(static_cast<NodeId>(v));
  }
  return out;
}

std::vector<NodeId> MetricsFrame::cluster_members(std::size_t size) const {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < node_count; ++v) {
    if (survivor[v] && cluster_size[v] == size) out.push_back(static_cast<NodeId>(v));
  }
  return out;
}

std::vector<std::size_t> MetricsFrame::cluster_sizes() const {
  std::set<std::size_t> s;
  for (std::size_t v = 0; v < node_count; ++v) {
    if (survivor[v]) s.insert(cluster_size[v]);
  }
  return {s.begin(), s.end()};
}

std::size_t MetricsFrame::largest_cluster_size() const {
  auto sizes = cluster_sizes();
  if (sizes.empty()) throw MetricError("frame has no survivors");
  return sizes.back();
}

double mean_accuracy(const MetricsFrame& f, std::span<const NodeId> nodes, int round) {
  if (nodes.empty()) throw MetricError("mean accuracy over an empty node set");
  double sum = 0.0;
  for (NodeId v : nodes) sum += f.at(v, round);
  return sum / static_cast<double>(nodes.size());
}

double mean_accuracy(const MetricsFrame& f, int round) {
  return mean_accuracy(f, f.survivors(), round);
}

double cluster_mean_accuracy(const MetricsFrame& f, std::size_t size, int round) {
  const auto members = f.cluster_members(size);
  if (members.empty()) {
    throw MetricError("no cluster of size " + std::to_string(size));
  }
  return mean_accuracy(f, members, round);
}

double accuracy_difference_at(const MetricsFrame& a, int round_a, const MetricsFrame& b,
                              int round_b, NodeId node) {
  const double denom = b.at(node, round_b);
  if (denom == 0.0) {
    throw MetricError("accuracy difference with zero reference accuracy at node " +
                      std::to_string(node));
  }
  return a.at(node, round_a) / denom - 1.0;
}

double mean_accuracy_difference_at(const MetricsFrame& a, int round_a, const MetricsFrame& b,
                                   int round_b, std::span<const NodeId> nodes) {
  if (nodes.empty()) throw MetricError("accuracy difference over an empty node set");
  double sum = 0.0;
  for (NodeId v : nodes) sum += accuracy_difference_at(a, round_a, b, round_b, v);
  return sum / static_cast<double>(nodes.size());
}

namespace {

int disruption_round_of(const MetricsFrame& f) {
  if (!f.disruption_round) throw MetricError("frame has no disruption marker");
  return *f.disruption_round;
}

void require_common_survivor(const MetricsFrame& a, const MetricsFrame& b, NodeId v) {
  const auto u = static_cast<std::size_t>(v);
  if (v < 0 || u >= a.node_count || u >= b.node_count || !a.survivor[u] || !b.survivor[u]) {
    throw MetricError("node " + std::to_string(v) + " does not survive in both runs");
  }
}

}  // namespace

double accuracy_difference(const MetricsFrame& a, const MetricsFrame& b, NodeId node, int t) {
  require_common_survivor(a, b, node);
  return accuracy_difference_at(a, disruption_round_of(a) + t, b, disruption_round_of(b) + t,
                                node);
}

double mean_accuracy_difference(const MetricsFrame& a, const MetricsFrame& b,
                                std::span<const NodeId> nodes, int t) {
  for (NodeId v : nodes) require_common_survivor(a, b, v);
  return mean_accuracy_difference_at(a, disruption_round_of(a) + t, b,
                                     disruption_round_of(b) + t, nodes);
}

double mean_accuracy_difference(const MetricsFrame& a, const MetricsFrame& b, int t) {
  std::vector<NodeId> common;
  for (std::size_t v = 0; v < std::min(a.node_count, b.node_count); ++v) {
    if (a.survivor[v] && b.survivor[v]) common.push_back(static_cast<NodeId>(v));
  }
  return mean_accuracy_difference(a, b, common, t);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double x : values) sum += x;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double x : values) ss += (x - s.mean) * (x - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    s.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
  }
  return s;
}

void write_run_csv_header(std::ostream& out) {
  out << "run_id,seed,case,threshold,round,node_id,cluster_size,accuracy,component_id\n";
}

void write_run_csv(std::ostream& out, const RunLabel& label, const MetricsFrame& f) {
  const std::string threshold = label.threshold ? format_real(*label.threshold) : "none";
  for (std::size_t r = 0; r < f.rounds.size(); ++r) {
    for (std::size_t v = 0; v < f.node_count; ++v) {
      const double a = f.accuracy[r][v];
      if (std::isnan(a)) continue;
      out << label.run_id << ',' << label.seed << ',' << label.case_name << ',' << threshold
          << ',' << f.rounds[r] << ',' << v << ',' << f.cluster_size[v] << ','
          << format_real(a) << ',' << f.component_id[v] << '\n';
    }
  }
}

void write_aggregate_csv_header(std::ostream& out) {
  out << "run_id,round_after_disruption,metric_name,value,ci95,count\n";
}

void write_aggregate_csv(std::ostream& out, const std::string& run_id,
                         std::span<const MetricsFrame> repetitions) {
  // metric name -> aligned round -> one value per repetition
  std::map<int, std::map<std::string, std::vector<double>>> table;
  std::vector<std::string> names{"mean", "lcc"};
  std::set<std::size_t> all_sizes;
  for (const auto& f : repetitions) {
    for (auto c : f.cluster_sizes()) all_sizes.insert(c);
  }
  for (auto c : all_sizes) names.push_back("cluster_" + std::to_string(c));

  for (const auto& f : repetitions) {
    const int offset = f.disruption_round.value_or(0);
    const auto sizes = f.cluster_sizes();
    if (sizes.empty()) continue;
    for (int round : f.rounds) {
      auto& row = table[round - offset];
      row["mean"].push_back(mean_accuracy(f, round));
      row["lcc"].push_back(cluster_mean_accuracy(f, sizes.back(), round));
      for (auto c : sizes) {
        row["cluster_" + std::to_string(c)].push_back(cluster_mean_accuracy(f, c, round));
      }
    }
  }
  for (const auto& [aligned, row] : table) {
    for (const auto& name : names) {
      auto it = row.find(name);
      if (it == row.end()) continue;
      const auto s = summarize(it->second);
      out << run_id << ',' << aligned << ',' << name << ',' << format_real(s.mean) << ','
          << format_real(s.ci95) << ',' << s.count << '\n';
    }
  }
}

}  // namespace decsim
