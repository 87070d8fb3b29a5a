#include "decsim/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "decsim/errors.hpp"
#include "decsim/rng.hpp"

namespace decsim {

Dataset::Dataset(std::size_t dim, std::size_t num_classes)
    : dim_(dim), class_index_(num_classes) {}

void Dataset::add(std::span<const float> features, ClassId label) {
  if (features.size() != dim_) throw ParameterError("feature dimension mismatch");
  if (label < 0 || static_cast<std::size_t>(label) >= class_index_.size()) {
    throw ParameterError("label " + std::to_string(label) + " out of range");
  }
  class_index_[label].push_back(labels_.size());
  labels_.push_back(label);
  features_.insert(features_.end(), features.begin(), features.end());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(dim_, num_classes());
  out.features_.reserve(indices.size() * dim_);
  out.labels_.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw ParameterError("subset index out of range");
    out.add(features(i), labels_[i]);
  }
  return out;
}

// --- IDX -------------------------------------------------------------------

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr std::size_t kIdxClasses = 10;

std::uint32_t read_be32(std::istream& in, const char* field) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw FormatError(field, "truncated header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

}  // namespace

Dataset read_idx_dataset(std::istream& images, std::istream& labels) {
  if (read_be32(images, "images.magic") != kImagesMagic) {
    throw FormatError("images.magic", "expected 0x00000803");
  }
  const auto count = read_be32(images, "images.count");
  const auto rows = read_be32(images, "images.rows");
  const auto cols = read_be32(images, "images.cols");
  if (read_be32(labels, "labels.magic") != kLabelsMagic) {
    throw FormatError("labels.magic", "expected 0x00000801");
  }
  const auto label_count = read_be32(labels, "labels.count");
  if (label_count != count) {
    throw FormatError("count", "image count " + std::to_string(count) +
                                   " != label count " + std::to_string(label_count));
  }

  const std::size_t dim = std::size_t{rows} * cols;
  Dataset ds(dim, kIdxClasses);
  std::vector<unsigned char> pixels(dim);
  std::vector<float> scaled(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!images.read(reinterpret_cast<char*>(pixels.data()),
                     static_cast<std::streamsize>(dim))) {
      throw FormatError("images.pixels", "truncated at sample " + std::to_string(i));
    }
    char label = 0;
    if (!labels.get(label)) {
      throw FormatError("labels.values", "truncated at sample " + std::to_string(i));
    }
    const auto y = static_cast<unsigned char>(label);
    if (y >= kIdxClasses) {
      throw FormatError("labels.values", "label " + std::to_string(y) + " at sample " +
                                             std::to_string(i) + " is not in 0..9");
    }
    std::transform(pixels.begin(), pixels.end(), scaled.begin(),
                   [](unsigned char p) { return static_cast<float>(p) / 255.0f; });
    ds.add(scaled, static_cast<ClassId>(y));
  }
  return ds;
}

Dataset load_idx_dataset(const std::filesystem::path& images,
                         const std::filesystem::path& labels) {
  std::ifstream img(images, std::ios::binary);
  if (!img) throw DataError("cannot open " + images.string());
  std::ifstream lbl(labels, std::ios::binary);
  if (!lbl) throw DataError("cannot open " + labels.string());
  return read_idx_dataset(img, lbl);
}

// --- synthetic ---------------------------------------------------------------

Dataset synthetic_dataset(const SyntheticSpec& spec, std::uint64_t draw) {
  if (spec.classes < 2 || spec.per_class < 1 || spec.dim < 1 || spec.modes < 1 ||
      !(spec.separation > 0.0)) {
    throw ParameterError("synthetic dataset needs classes >= 2, per_class, dim, modes >= 1");
  }
  std::normal_distribution<double> normal(0.0, 1.0);

  auto mean_rng = make_rng(spec.seed, "synthetic.means");
  // means[c * modes + k]: mode k of class c
  std::vector<std::vector<double>> means(spec.classes * spec.modes,
                                         std::vector<double>(spec.dim));
  for (auto& mu : means) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& x : mu) {
        x = normal(mean_rng);
        norm += x * x;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : mu) x *= spec.separation / norm;
  }

  auto noise_rng = make_rng(spec.seed, "synthetic.samples", draw);
  Dataset ds(spec.dim, spec.classes);
  std::vector<float> x(spec.dim);
  for (std::size_t k = 0; k < spec.per_class; ++k) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      for (std::size_t d = 0; d < spec.dim; ++d) {
        x[d] = static_cast<float>(means[c * spec.modes + k % spec.modes][d] +
                                  normal(noise_rng));
      }
      ds.add(x, static_cast<ClassId>(c));
    }
  }
  return ds;
}

Dataset subsample_per_class(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ParameterError("subsample fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < ds.num_classes(); ++c) {
    auto idx = ds.class_indices(static_cast<ClassId>(c));
    if (idx.empty()) continue;
    std::vector<std::size_t> pool(idx.begin(), idx.end());
    auto rng = make_rng(seed, "subsample", c);
    std::shuffle(pool.begin(), pool.end(), rng);
    auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size()))));
    keep.insert(keep.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(keep.begin(), keep.end());
  return ds.subset(keep);
}

// --- partitions ----------------------------------------------------------------

LabelSplit LabelSplit::halves(std::size_t num_classes) {
  LabelSplit s;
  for (std::size_t c = 0; c < num_classes; ++c) {
    (c < num_classes / 2 ? s.l1 : s.l2).push_back(static_cast<ClassId>(c));
  }
  return s;
}

void LabelSplit::validate(std::size_t num_classes) const {
  std::vector<int> seen(num_classes, 0);
  for (const auto* group : {&l1, &l2}) {
    for (ClassId c : *group) {
      if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
        throw ParameterError("label split class " + std::to_string(c) + " out of range");
      }
      ++seen[c];
    }
  }
  for (int s : seen) {
    if (s != 1) throw ParameterError("label split must partition all classes");
  }
}

std::size_t NodeAssignment::total() const {
  std::size_t t = 0;
  for (const auto& v : indices) t += v.size();
  return t;
}

namespace {

NodeAssignment empty_assignment(std::size_t node_count, std::size_t num_classes) {
  NodeAssignment a;
  a.indices.resize(node_count);
  a.class_counts.assign(node_count, std::vector<std::size_t>(num_classes, 0));
  return a;
}

std::vector<NodeId> canonical(std::span<const NodeId> nodes, std::size_t node_count) {
  std::vector<NodeId> out(nodes.begin(), nodes.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw ParameterError("duplicate node id in node set");
  }
  for (NodeId v : out) {
    if (v < 0 || static_cast<std::size_t>(v) >= node_count) {
      throw ParameterError("node id " + std::to_string(v) + " out of range");
    }
  }
  return out;
}

std::vector<std::size_t> shuffled_class(const Dataset& ds, ClassId c, std::uint64_t seed) {
  auto idx = ds.class_indices(c);
  std::vector<std::size_t> pool(idx.begin(), idx.end());
  auto rng = make_rng(seed, "partition", static_cast<std::uint64_t>(c));
  std::shuffle(pool.begin(), pool.end(), rng);
  return pool;
}

void give(NodeAssignment& a, NodeId v, ClassId c, std::span<const std::size_t> samples) {
  auto& dst = a.indices[v];
  dst.insert(dst.end(), samples.begin(), samples.end());
  a.class_counts[v][c] += samples.size();
}

void finish(NodeAssignment& a) {
  for (auto& v : a.indices) std::sort(v.begin(), v.end());
}

}  // namespace

NodeAssignment partition_iid(const Dataset& ds, std::size_t node_count,
                             std::span<const NodeId> holders, std::size_t per_class,
                             std::uint64_t seed) {
  const auto nodes = canonical(holders, node_count);
  auto a = empty_assignment(node_count, ds.num_classes());
  const std::size_t need = per_class * nodes.size();
  for (std::size_t c = 0; c < ds.num_classes(); ++c) {
    const auto cls = static_cast<ClassId>(c);
    if (ds.class_indices(cls).size() < need) {
      throw CapacityError("class " + std::to_string(c) + " has " +
                          std::to_string(ds.class_indices(cls).size()) +
                          " samples, partition needs " + std::to_string(need));
    }
    const auto pool = shuffled_class(ds, cls, seed);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      give(a, nodes[k], cls,
           std::span(pool).subspan(k * per_class, per_class));
    }
  }
  finish(a);
  return a;
}

NodeAssignment partition_case1(const Dataset& ds, std::size_t node_count,
                               std::span<const NodeId> survivors, std::uint64_t seed,
                               std::size_t per_class) {
  return partition_iid(ds, node_count, survivors, per_class, seed);
}

NodeAssignment partition_case2(const Dataset& ds, std::size_t node_count,
                               std::uint64_t seed, std::size_t per_class) {
  std::vector<NodeId> all(node_count);
  std::iota(all.begin(), all.end(), 0);
  return partition_iid(ds, node_count, all, per_class, seed);
}

NodeAssignment partition_case3(const Dataset& ds, const LabelSplit& split,
                               std::span<const NodeId> disrupted,
                               std::span<const NodeId> survivors,
                               std::size_t survivor_l2_per_class, std::uint64_t seed) {
  split.validate(ds.num_classes());
  const std::size_t node_count = disrupted.size() + survivors.size();
  const auto dis = canonical(disrupted, node_count);
  const auto sur = canonical(survivors, node_count);
  {
    std::vector<NodeId> all(dis);
    all.insert(all.end(), sur.begin(), sur.end());
    canonical(all, node_count);  // disjoint and covering 0..n-1
  }
  if (survivor_l2_per_class < 1) throw ParameterError("survivor_l2_per_class must be positive");

  auto a = empty_assignment(node_count, ds.num_classes());

  // Even split of `pool` over `nodes` (ascending), remainder to lowest ids.
  auto spread = [&a](std::span<const std::size_t> pool, std::span<const NodeId> nodes,
                     ClassId c) {
    if (nodes.empty()) return;
    const std::size_t base = pool.size() / nodes.size();
    const std::size_t extra = pool.size() % nodes.size();
    std::size_t at = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const std::size_t take = base + (k < extra ? 1 : 0);
      give(a, nodes[k], c, pool.subspan(at, take));
      at += take;
    }
  };

  std::vector<NodeId> all_nodes(node_count);
  std::iota(all_nodes.begin(), all_nodes.end(), 0);
  for (ClassId c : split.l1) {
    const auto pool = shuffled_class(ds, c, seed);
    spread(pool, all_nodes, c);
  }
  for (ClassId c : split.l2) {
    const auto pool = shuffled_class(ds, c, seed);
    const std::size_t need = survivor_l2_per_class * sur.size();
    if (pool.size() < need) {
      throw CapacityError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                          " samples, survivors need " + std::to_string(need));
    }
    std::span<const std::size_t> view(pool);
    for (std::size_t k = 0; k < sur.size(); ++k) {
      give(a, sur[k], c, view.subspan(k * survivor_l2_per_class, survivor_l2_per_class));
    }
    spread(view.subspan(need), dis, c);
  }
  finish(a);
  return a;
}

void write_assignment_json(std::ostream& out, const NodeAssignment& a) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t v = 0; v < a.indices.size(); ++v) j[std::to_string(v)] = a.indices[v];
  out << j.dump(2) << '\n';
}

}  // namespace decsim
