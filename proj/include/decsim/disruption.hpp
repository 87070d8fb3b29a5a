#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "decsim/topology.hpp"

namespace decsim {

/// Which nodes go down, and when. A threshold of 0 means the nodes are gone
/// before the first round; std::nullopt means they are never removed.
struct DisruptionPlan {
  CentralityKind kind = CentralityKind::structural_hole;
  double fraction = 0.1;
  std::vector<NodeId> disrupted;  // rank order
  std::optional<double> threshold;
  std::optional<int> triggered_round;

  bool triggered() const noexcept { return triggered_round.has_value(); }
  /// Complement of `disrupted` in 0..node_count-1, ascending.
  std::vector<NodeId> survivors(std::size_t node_count) const;
};

/// round(fraction * n) top-ranked nodes (at least one). Fractions outside
/// (0, 1) or selecting every node throw ParameterError.
DisruptionPlan select_disrupted(const Graph& g, CentralityKind kind, double fraction,
                                std::optional<double> threshold = std::nullopt);

/// Records `round` as the trigger round the first time mean_accuracy reaches
/// the threshold. Plans without a threshold never fire. Calling this on a
/// plan that already fired is a logic error.
bool check_trigger(DisruptionPlan& plan, double mean_accuracy, int round);

/// The network that remains once the plan has fired.
struct DisruptedNetwork {
  Graph graph;                              // same ids, disrupted nodes isolated
  std::vector<bool> alive;
  std::vector<std::size_t> component_size;  // 0 for disrupted nodes
  std::vector<int> component_id;            // -1 for disrupted nodes
};

/// Induced subgraph on the survivors plus each survivor's component size.
/// Does not require the plan to have fired.
DisruptedNetwork disrupted_network(const Graph& g, const DisruptionPlan& plan);

/// As above, for a plan that has fired (throws std::logic_error otherwise).
DisruptedNetwork apply_disruption(const Graph& g, const DisruptionPlan& plan);

/// {"triggered_round", "threshold", "disrupted_ids", "component_size_per_survivor"}
void write_disruption_json(std::ostream& out, const DisruptionPlan& plan,
                           const DisruptedNetwork& net);

}  // namespace decsim
