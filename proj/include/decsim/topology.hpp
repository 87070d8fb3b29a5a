#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace decsim {

using NodeId = std::int32_t;

/// Undirected, unweighted simple graph over contiguous node ids 0..n-1.
///
/// Adjacency lists keep insertion order; `edges()` reports each edge once as
/// (min, max), sorted.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::size_t node_count);

  /// Adds {u, v}. Returns false if the edge already exists. Self-loops and
  /// out-of-range ids throw ParameterError.
  bool add_edge(NodeId u, NodeId v);
  bool has_edge(NodeId u, NodeId v) const;

  std::size_t node_count() const noexcept { return adjacency_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  std::size_t degree(NodeId v) const { return neighbours(v).size(); }
  std::span<const NodeId> neighbours(NodeId v) const;

  std::vector<std::pair<NodeId, NodeId>> edges() const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.edges() == b.edges() && a.node_count() == b.node_count();
  }

 private:
  void check_id(NodeId v) const;

  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t edge_count_ = 0;
};

struct BAParams {
  std::size_t n = 100;
  std::size_t m = 2;
  std::uint64_t seed = 0;
};

/// Barabasi-Albert preferential attachment. Starts from m isolated seed
/// nodes; node m links to every seed, and each later node links to m distinct
/// earlier nodes drawn with probability proportional to degree. The result
/// has exactly m*(n-m) edges.
Graph generate_ba(const BAParams& params);

enum class CentralityKind { degree, betweenness, structural_hole };

std::string_view to_string(CentralityKind kind);
CentralityKind parse_centrality(std::string_view name);

struct CentralityMap {
  CentralityKind kind;
  std::vector<double> score;
};

/// degree: deg/(n-1). betweenness: exact Brandes, normalised by
/// 2/((n-1)(n-2)). structural_hole: Burt effective size deg - 2t/deg.
CentralityMap centrality(const Graph& g, CentralityKind kind);

/// Node ids sorted by score descending, ties by ascending id.
std::vector<NodeId> rank_nodes(const CentralityMap& c);

using Component = std::vector<NodeId>;

/// Components ordered by size descending, ties by smallest member id. Members
/// of each component are sorted.
std::vector<Component> connected_components(const Graph& g);

/// Same, restricted to nodes with present[v] == true. Absent nodes and their
/// edges are ignored.
std::vector<Component> connected_components(const Graph& g,
                                            const std::vector<bool>& present);

/// Copy of g with every edge touching a removed node dropped. Ids are kept.
Graph remove_nodes(const Graph& g, std::span<const NodeId> removed);

struct PercolationPoint {
  double removed_fraction = 0.0;
  double phi = 0.0;
  std::vector<std::size_t> component_sizes;  // descending

  std::size_t lcc_size() const {
    return component_sizes.empty() ? 0 : component_sizes.front();
  }
  std::size_t num_isolated() const;
};

/// Static targeted attack: the ranking is computed once on g, then nodes are
/// removed in rank order, round(k * step_fraction * n) after step k.
std::vector<PercolationPoint> percolation_curve(const Graph& g,
                                                CentralityKind kind,
                                                double step_fraction);

/// State of the network after removing the first `removed` ranked nodes.
PercolationPoint percolation_point(const Graph& g,
                                   std::span<const NodeId> ranking,
                                   std::size_t removed);

// Edge-list text format: "# nodes=N" header, then one "u v" pair per line.
void write_edge_list(std::ostream& out, const Graph& g);
Graph read_edge_list(std::istream& in);

void write_percolation_csv(std::ostream& out,
                           std::span<const PercolationPoint> curve);

}  // namespace decsim
