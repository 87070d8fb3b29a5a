#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "decsim/topology.hpp"

namespace decsim {

using ClassId = std::int32_t;

/// Labelled samples with dense float features, stored row-major (one sample
/// per row).
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::size_t num_classes);

  void add(std::span<const float> features, ClassId label);

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_classes() const noexcept { return class_index_.size(); }

  std::span<const float> features(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  const float* data() const noexcept { return features_.data(); }
  ClassId label(std::size_t i) const { return labels_[i]; }
  std::span<const ClassId> labels() const noexcept { return labels_; }

  /// Sample indices of one class, ascending.
  std::span<const std::size_t> class_indices(ClassId c) const {
    return class_index_.at(static_cast<std::size_t>(c));
  }

  /// New dataset holding the given samples, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::size_t dim_ = 0;
  std::vector<float> features_;
  std::vector<ClassId> labels_;
  std::vector<std::vector<std::size_t>> class_index_;
};

/// Reads an IDX image/label file pair (big-endian, magic 0x00000803 and
/// 0x00000801). Pixels are scaled to [0, 1]. Throws FormatError naming the
/// offending field.
Dataset load_idx_dataset(const std::filesystem::path& images,
                         const std::filesystem::path& labels);
Dataset read_idx_dataset(std::istream& images, std::istream& labels);

struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t dim = 64;
  std::size_t per_class = 100;
  /// Distance of every class mean from the origin, in units of the
  /// per-coordinate noise standard deviation.
  double separation = 4.0;
  /// Sub-clusters per class; sample k of a class comes from mode k % modes.
  std::size_t modes = 1;
  std::uint64_t seed = 1;
};

/// Gaussian blobs with unit covariance around each class's mode means. Means
/// depend only on spec.seed; `draw` selects an independent noise sample, so a
/// held-out set is the same spec with a different draw.
Dataset synthetic_dataset(const SyntheticSpec& spec, std::uint64_t draw = 0);

/// Keeps `fraction` of each class (rounded, at least one sample), chosen
/// uniformly by seed. Indices in the result follow the original order.
Dataset subsample_per_class(const Dataset& ds, double fraction, std::uint64_t seed);

struct LabelSplit {
  std::vector<ClassId> l1;
  std::vector<ClassId> l2;

  /// l1 = {0..4}, l2 = {5..9} for ten classes; generally the lower and upper
  /// halves.
  static LabelSplit halves(std::size_t num_classes);
  void validate(std::size_t num_classes) const;
};

/// Per-node local training sets as indices into a Dataset.
struct NodeAssignment {
  std::vector<std::vector<std::size_t>> indices;        // per node, sorted
  std::vector<std::vector<std::size_t>> class_counts;   // per node, per class

  std::size_t node_count() const noexcept { return indices.size(); }
  std::size_t total() const;
  std::size_t size_of(NodeId v) const { return indices.at(static_cast<std::size_t>(v)).size(); }
};

/// Every holder gets exactly `per_class` samples of each class, drawn without
/// replacement; other nodes get nothing.
NodeAssignment partition_iid(const Dataset& ds, std::size_t node_count,
                             std::span<const NodeId> holders, std::size_t per_class,
                             std::uint64_t seed);

/// Case 1: data only on survivors, 7 per class by default.
NodeAssignment partition_case1(const Dataset& ds, std::size_t node_count,
                               std::span<const NodeId> survivors, std::uint64_t seed,
                               std::size_t per_class = 7);

/// Case 2: every node holds data, 6 per class by default.
NodeAssignment partition_case2(const Dataset& ds, std::size_t node_count,
                               std::uint64_t seed, std::size_t per_class = 6);

/// Case 3: l1 classes are split over all nodes as evenly as possible
/// (remainders to the lowest ids). For l2 classes each survivor gets exactly
/// `survivor_l2_per_class` and the rest is split evenly over the disrupted
/// nodes.
NodeAssignment partition_case3(const Dataset& ds, const LabelSplit& split,
                               std::span<const NodeId> disrupted,
                               std::span<const NodeId> survivors,
                               std::size_t survivor_l2_per_class, std::uint64_t seed);

/// JSON object: node id -> sorted sample-index list.
void write_assignment_json(std::ostream& out, const NodeAssignment& a);

}  // namespace decsim
