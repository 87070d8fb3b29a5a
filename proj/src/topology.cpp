#include "decsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include "decsim/errors.hpp"
#include "decsim/rng.hpp"
#include "decsim/text.hpp"

namespace decsim {

Graph::Graph(std::size_t node_count) : adjacency_(node_count) {}

void Graph::check_id(NodeId v) const {
  if (v < 0 || static_cast<std::size_t>(v) >= adjacency_.size()) {
    throw ParameterError("node id " + std::to_string(v) + " out of range");
  }
}

bool Graph::add_edge(NodeId u, NodeId v) {
  check_id(u);
  check_id(v);
  if (u == v) throw ParameterError("self-loop on node " + std::to_string(u));
  if (has_edge(u, v)) return false;
  adjacency_[u].push_back(v);
  adjacency_[v].push_back(u);
  ++edge_count_;
  return true;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  check_id(u);
  check_id(v);
  const auto& a = adjacency_[u].size() <= adjacency_[v].size() ? adjacency_[u]
                                                                : adjacency_[v];
  NodeId other = &a == &adjacency_[u] ? v : u;
  return std::find(a.begin(), a.end(), other) != a.end();
}

std::span<const NodeId> Graph::neighbours(NodeId v) const {
  check_id(v);
  return adjacency_[v];
}

std::vector<std::pair<NodeId, NodeId>> Graph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(edge_count_);
  for (std::size_t u = 0; u < adjacency_.size(); ++u) {
    for (NodeId v : adjacency_[u]) {
      if (static_cast<NodeId>(u) < v) out.emplace_back(static_cast<NodeId>(u), v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Graph generate_ba(const BAParams& params) {
  if (params.m < 1 || params.m >= params.n) {
    throw ParameterError("BA parameters require 1 <= m < n");
  }
  Graph g(params.n);
  Rng rng(params.seed);

  // Each endpoint appears once per incident edge, so a uniform draw from this
  // list picks a node with probability proportional to its degree.
  std::vector<NodeId> endpoints;
  endpoints.reserve(2 * params.m * params.n);

  std::vector<NodeId> targets(params.m);
  std::iota(targets.begin(), targets.end(), 0);
  for (auto source = static_cast<NodeId>(params.m);
       source < static_cast<NodeId>(params.n); ++source) {
    for (NodeId t : targets) {
      g.add_edge(source, t);
      endpoints.push_back(t);
      endpoints.push_back(source);
    }
    std::set<NodeId> chosen;
    std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
    while (chosen.size() < params.m) chosen.insert(endpoints[pick(rng)]);
    targets.assign(chosen.begin(), chosen.end());
  }
  return g;
}

std::string_view to_string(CentralityKind kind) {
  switch (kind) {
    case CentralityKind::degree: return "degree";
    case CentralityKind::betweenness: return "betweenness";
    case CentralityKind::structural_hole: return "structural_hole";
  }
  return "?";
}

CentralityKind parse_centrality(std::string_view name) {
  if (name == "degree") return CentralityKind::degree;
  if (name == "betweenness") return CentralityKind::betweenness;
  if (name == "structural_hole") return CentralityKind::structural_hole;
  throw ParameterError("unknown centrality '" + std::string(name) + "'");
}

namespace {

std::vector<double> degree_centrality(const Graph& g) {
  const auto n = g.node_count();
  std::vector<double> s(n, 0.0);
  if (n < 2) return s;
  for (std::size_t v = 0; v < n; ++v) {
    s[v] = static_cast<double>(g.degree(static_cast<NodeId>(v))) /
           static_cast<double>(n - 1);
  }
  return s;
}

// Brandes (2001), unweighted. The raw accumulation counts each unordered
// pair twice, which the 2/((n-1)(n-2)) normalisation folds into one factor.
std::vector<double> betweenness_centrality(const Graph& g) {
  const auto n = g.node_count();
  std::vector<double> cb(n, 0.0);
  if (n < 3) return cb;

  std::vector<NodeId> order;
  std::vector<std::vector<NodeId>> preds(n);
  std::vector<double> sigma(n);
  std::vector<long> dist(n);
  std::vector<double> delta(n);
  order.reserve(n);

  for (std::size_t s = 0; s < n; ++s) {
    order.clear();
    for (auto& p : preds) p.clear();
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(delta.begin(), delta.end(), 0.0);
    sigma[s] = 1.0;
    dist[s] = 0;

    std::queue<NodeId> q;
    q.push(static_cast<NodeId>(s));
    while (!q.empty()) {
      NodeId v = q.front();
      q.pop();
      order.push_back(v);
      for (NodeId w : g.neighbours(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      NodeId w = *it;
      for (NodeId v : preds[w]) {
        delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      }
      if (w != static_cast<NodeId>(s)) cb[w] += delta[w];
    }
  }
  const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  for (auto& x : cb) x *= scale;
  return cb;
}

std::vector<double> effective_size(const Graph& g) {
  const auto n = g.node_count();
  std::vector<double> s(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    auto nb = g.neighbours(static_cast<NodeId>(v));
    if (nb.empty()) continue;
    std::size_t ties = 0;
    for (std::size_t a = 0; a < nb.size(); ++a) {
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        if (g.has_edge(nb[a], nb[b])) ++ties;
      }
    }
    const double deg = static_cast<double>(nb.size());
    s[v] = deg - 2.0 * static_cast<double>(ties) / deg;
  }
  return s;
}

}  // namespace

CentralityMap centrality(const Graph& g, CentralityKind kind) {
  if (g.node_count() == 0) throw ParameterError("centrality of an empty graph");
  switch (kind) {
    case CentralityKind::degree: return {kind, degree_centrality(g)};
    case CentralityKind::betweenness: return {kind, betweenness_centrality(g)};
    case CentralityKind::structural_hole: return {kind, effective_size(g)};
  }
  throw ParameterError("unknown centrality kind");
}

std::vector<NodeId> rank_nodes(const CentralityMap& c) {
  std::vector<NodeId> ids(c.score.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) {
    return c.score[a] > c.score[b];
  });
  return ids;
}

std::vector<Component> connected_components(const Graph& g) {
  return connected_components(g, std::vector<bool>(g.node_count(), true));
}

std::vector<Component> connected_components(const Graph& g,
                                            const std::vector<bool>& present) {
  const auto n = g.node_count();
  if (present.size() != n) throw ParameterError("presence mask size mismatch");
  std::vector<bool> seen(n, false);
  std::vector<Component> out;
  std::vector<NodeId> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (!present[root] || seen[root]) continue;
    Component comp;
    stack.push_back(static_cast<NodeId>(root));
    seen[root] = true;
    while (!stack.empty()) {
      NodeId v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (NodeId w : g.neighbours(v)) {
        if (present[w] && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  // Roots are visited in id order, so front() is each component's minimum
  // and a stable sort by size keeps the id tie-break.
  std::stable_sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
    return a.size() > b.size();
  });
  return out;
}

Graph remove_nodes(const Graph& g, std::span<const NodeId> removed) {
  std::vector<bool> gone(g.node_count(), false);
  for (NodeId v : removed) {
    if (v < 0 || static_cast<std::size_t>(v) >= g.node_count()) {
      throw ParameterError("removed node id out of range");
    }
    gone[v] = true;
  }
  Graph out(g.node_count());
  for (auto [u, v] : g.edges()) {
    if (!gone[u] && !gone[v]) out.add_edge(u, v);
  }
  return out;
}

std::size_t PercolationPoint::num_isolated() const {
  return static_cast<std::size_t>(
      std::count(component_sizes.begin(), component_sizes.end(), std::size_t{1}));
}

PercolationPoint percolation_point(const Graph& g, std::span<const NodeId> ranking,
                                   std::size_t removed) {
  const auto n = g.node_count();
  removed = std::min(removed, ranking.size());
  std::vector<bool> present(n, true);
  for (std::size_t k = 0; k < removed; ++k) present[ranking[k]] = false;

  PercolationPoint p;
  p.removed_fraction = n == 0 ? 0.0 : static_cast<double>(removed) / static_cast<double>(n);
  for (const auto& c : connected_components(g, present)) {
    p.component_sizes.push_back(c.size());
  }
  p.phi = n == 0 ? 0.0 : static_cast<double>(p.lcc_size()) / static_cast<double>(n);
  return p;
}

std::vector<PercolationPoint> percolation_curve(const Graph& g, CentralityKind kind,
                                                double step_fraction) {
  if (!(step_fraction > 0.0 && step_fraction <= 1.0)) {
    throw ParameterError("step_fraction must lie in (0, 1]");
  }
  const auto n = g.node_count();
  const auto ranking = rank_nodes(centrality(g, kind));
  const auto steps = static_cast<std::size_t>(std::ceil(1.0 / step_fraction - 1e-9));

  std::vector<PercolationPoint> curve;
  curve.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    double target = std::min(1.0, static_cast<double>(k) * step_fraction);
    auto removed = static_cast<std::size_t>(std::llround(target * static_cast<double>(n)));
    curve.push_back(percolation_point(g, ranking, removed));
  }
  return curve;
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "# nodes=" << g.node_count() << '\n';
  for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

Graph read_edge_list(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("header", "empty edge list");
  auto header = trim(line);
  constexpr std::string_view prefix = "# nodes=";
  if (!header.starts_with(prefix)) {
    throw FormatError("header", "expected '# nodes=N'");
  }
  std::size_t n = 0;
  auto digits = header.substr(prefix.size());
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
    throw FormatError("header", "bad node count");
  }
  Graph g(n);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream fields{std::string(t)};
    long u = -1;
    long v = -1;
    if (!(fields >> u >> v) || u < 0 || v < 0 || static_cast<std::size_t>(u) >= n ||
        static_cast<std::size_t>(v) >= n || u == v) {
      throw FormatError("edge", "invalid edge on line " + std::to_string(line_no));
    }
    if (!g.add_edge(static_cast<NodeId>(u), static_cast<NodeId>(v))) {
      throw FormatError("edge", "duplicate edge on line " + std::to_string(line_no));
    }
  }
  return g;
}

void write_percolation_csv(std::ostream& out, std::span<const PercolationPoint> curve) {
  out << "removed_fraction,phi,num_components,num_isolated,lcc_size\n";
  for (const auto& p : curve) {
    out << format_real(p.removed_fraction) << ',' << format_real(p.phi) << ','
        << p.component_sizes.size() << ',' << p.num_isolated() << ',' << p.lcc_size()
        << '\n';
  }
}

}  // namespace decsim
