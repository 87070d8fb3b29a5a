#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "decsim/dataset.hpp"
#include "decsim/topology.hpp"

namespace decsim {

/// Fully connected ReLU network: input -> hidden... -> class logits.
struct ModelSpec {
  std::size_t input_dim = 784;
  std::vector<std::size_t> hidden_sizes{512, 256, 128};
  std::size_t num_classes = 10;

  void validate() const;
  /// input_dim, hidden sizes..., num_classes
  std::vector<std::size_t> layer_widths() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Position of one dense layer inside the flat parameter vector. Weights are
/// an (out x in) column-major block followed by `out` biases.
struct LayerSlice {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

std::vector<LayerSlice> layer_layout(const ModelSpec& spec);

struct ModelState {
  ModelSpec spec;
  std::vector<double> params;
  std::vector<double> momentum;  // same length as params
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.5;
  std::size_t batch_size = 10;
  std::size_t local_epochs = 1;

  void validate() const;
};

enum class TrainStatus { trained, skipped };

struct TrainResult {
  ModelState state;
  TrainStatus status = TrainStatus::trained;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases and momentum zero.
ModelState init_model(const ModelSpec& spec, std::uint64_t seed);

/// Class logits for one sample.
std::vector<double> forward(const ModelState& state, std::span<const float> x);

/// argmax of the logits, ties to the lowest class id.
ClassId predict(const ModelState& state, std::span<const float> x);

/// Mean softmax cross-entropy over the selected samples.
double loss(const ModelState& state, const Dataset& data,
            std::span<const std::size_t> indices);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // laid out like ModelState::params
};

LossGradient loss_and_gradient(const ModelState& state, const Dataset& data,
                               std::span<const std::size_t> indices);

/// local_epochs passes of mini-batch SGD with momentum over the selected
/// samples. Each pass reshuffles with a stream derived from (seed, epoch).
/// Empty `indices` returns the input unchanged with TrainStatus::skipped.
TrainResult local_train(const ModelState& state, const Dataset& data,
                        std::span<const std::size_t> indices, const TrainConfig& cfg,
                        std::uint64_t seed);

/// Fraction of samples whose predicted class matches the label.
double evaluate(const ModelState& state, const Dataset& test);

struct AggregationEntry {
  NodeId node = 0;
  const ModelState* state = nullptr;
  std::size_t dataset_size = 0;
};

/// DecAvg: convex combination of the neighbourhood's models (self included)
/// with weight max(|D_j|, 1) / sum_k max(|D_k|, 1). Entries are combined in
/// ascending node order, so the result does not depend on input order. The
/// momentum buffer of the result is zero.
ModelState decavg_aggregate(std::span<const AggregationEntry> inputs);

// Binary checkpoint, little-endian: u32 magic "DSCK", u32 number of layer
// widths, u32 widths..., then the parameters as 32-bit floats.
void write_checkpoint(std::ostream& out, const ModelState& state);
ModelState read_checkpoint(std::istream& in);

}  // namespace decsim
