#include "decsim/disruption.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "decsim/errors.hpp"

namespace decsim {

std::vector<NodeId> DisruptionPlan::survivors(std::size_t node_count) const {
  std::vector<bool> gone(node_count, false);
  for (NodeId v : disrupted) gone.at(static_cast<std::size_t>(v)) = true;
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < node_count; ++v) {
    if (!gone[v]) out.push_back(static_cast<NodeId>(v));
  }
  return out;
}

DisruptionPlan select_disrupted(const Graph& g, CentralityKind kind, double fraction,
                                std::optional<double> threshold) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ParameterError("disrupted fraction must lie in (0, 1)");
  }
  if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) {
    throw ParameterError("accuracy threshold must lie in [0, 1]");
  }
  const auto n = g.node_count();
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  if (count >= n) {
    throw ParameterError("disrupted fraction would remove every node");
  }
  auto ranking = rank_nodes(centrality(g, kind));
  ranking.resize(count);
  return DisruptionPlan{kind, fraction, std::move(ranking), threshold, std::nullopt};
}

bool check_trigger(DisruptionPlan& plan, double mean_accuracy, int round) {
  if (plan.triggered()) throw std::logic_error("disruption already triggered");
  if (!plan.threshold) return false;
  if (mean_accuracy >= *plan.threshold) {
    plan.triggered_round = round;
    return true;
  }
  return false;
}

DisruptedNetwork disrupted_network(const Graph& g, const DisruptionPlan& plan) {
  DisruptedNetwork net{remove_nodes(g, plan.disrupted), std::vector<bool>(g.node_count(), true),
                       std::vector<std::size_t>(g.node_count(), 0),
                       std::vector<int>(g.node_count(), -1)};
  for (NodeId v : plan.disrupted) net.alive[v] = false;
  const auto comps = connected_components(net.graph, net.alive);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    for (NodeId v : comps[c]) {
      net.component_size[v] = comps[c].size();
      net.component_id[v] = static_cast<int>(c);
    }
  }
  return net;
}

DisruptedNetwork apply_disruption(const Graph& g, const DisruptionPlan& plan) {
  if (!plan.triggered()) throw std::logic_error("disruption applied before it was triggered");
  return disrupted_network(g, plan);
}

void write_disruption_json(std::ostream& out, const DisruptionPlan& plan,
                           const DisruptedNetwork& net) {
  nlohmann::ordered_json j;
  j["triggered_round"] = plan.triggered_round ? nlohmann::ordered_json(*plan.triggered_round)
                                              : nlohmann::ordered_json(nullptr);
  j["threshold"] = plan.threshold ? nlohmann::ordered_json(*plan.threshold)
                                  : nlohmann::ordered_json(nullptr);
  j["centrality"] = std::string(to_string(plan.kind));
  j["disrupted_ids"] = plan.disrupted;
  auto sizes = nlohmann::ordered_json::object();
  for (std::size_t v = 0; v < net.alive.size(); ++v) {
    if (net.alive[v]) sizes[std::to_string(v)] = net.component_size[v];
  }
  j["component_size_per_survivor"] = std::move(sizes);
  out << j.dump(2) << '\n';
}

}  // namespace decsim
