#include "decsim/learner.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "decsim/errors.hpp"
#include "decsim/rng.hpp"

namespace decsim {

using Matrix = Eigen::MatrixXd;
using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MutVecMap = Eigen::Map<Eigen::VectorXd>;

void ModelSpec::validate() const {
  if (input_dim == 0 || num_classes == 0) {
    throw ParameterError("model input_dim and num_classes must be positive");
  }
  for (auto h : hidden_sizes) {
    if (h == 0) throw ParameterError("hidden layer sizes must be positive");
  }
}

std::vector<std::size_t> ModelSpec::layer_widths() const {
  std::vector<std::size_t> w{input_dim};
  w.insert(w.end(), hidden_sizes.begin(), hidden_sizes.end());
  w.push_back(num_classes);
  return w;
}

std::size_t ModelSpec::parameter_count() const {
  auto w = layer_widths();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l] * w[l + 1] + w[l + 1];
  return n;
}

std::vector<LayerSlice> layer_layout(const ModelSpec& spec) {
  auto w = spec.layer_widths();
  std::vector<LayerSlice> out;
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    LayerSlice s{w[l], w[l + 1], at, at + w[l] * w[l + 1]};
    at = s.bias_offset + s.out;
    out.push_back(s);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (local_epochs < 1) throw ParameterError("local_epochs must be >= 1");
}

ModelState init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelState s{spec, std::vector<double>(spec.parameter_count(), 0.0),
               std::vector<double>(spec.parameter_count(), 0.0)};
  Rng rng(seed);
  for (const auto& layer : layer_layout(spec)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t k = 0; k < layer.in * layer.out; ++k) {
      s.params[layer.weight_offset + k] = u(rng);
    }
  }
  return s;
}

namespace {

void check_state(const ModelState& s) {
  if (s.params.size() != s.spec.parameter_count() || s.momentum.size() != s.params.size()) {
    throw ParameterError("model state does not match its spec");
  }
}

void check_dim(const ModelState& s, std::size_t dim) {
  if (dim != s.spec.input_dim) {
    throw ParameterError("input dimension " + std::to_string(dim) + " != model input " +
                         std::to_string(s.spec.input_dim));
  }
}

Matrix gather(const Dataset& data, std::span<const std::size_t> indices) {
  Matrix x(static_cast<Eigen::Index>(data.dim()), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto f = data.features(indices[k]);
    for (std::size_t d = 0; d < f.size(); ++d) {
      x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = f[d];
    }
  }
  return x;
}

ConstMap weights(const ModelState& s, const LayerSlice& l) {
  return {s.params.data() + l.weight_offset, static_cast<Eigen::Index>(l.out),
          static_cast<Eigen::Index>(l.in)};
}

ConstVecMap biases(const ModelState& s, const LayerSlice& l) {
  return {s.params.data() + l.bias_offset, static_cast<Eigen::Index>(l.out)};
}

// Pre-activations of every layer for a batch (columns are samples).
std::vector<Matrix> forward_batch(const ModelState& s, const std::vector<LayerSlice>& layout,
                                  const Matrix& x) {
  std::vector<Matrix> z;
  z.reserve(layout.size());
  const Matrix* input = &x;
  Matrix activated;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    z.push_back((weights(s, layout[l]) * *input).colwise() + biases(s, layout[l]));
    if (l + 1 < layout.size()) {
      activated = z.back().cwiseMax(0.0);
      input = &activated;
    }
  }
  return z;
}

Eigen::Index argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

// Column-wise log-softmax, numerically stable.
Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

void check_labels(const ModelState& s, const Dataset& data) {
  if (data.num_classes() > s.spec.num_classes) {
    throw ParameterError("dataset has more classes than the model outputs");
  }
}

}  // namespace

std::vector<double> forward(const ModelState& state, std::span<const float> x) {
  check_state(state);
  check_dim(state, x.size());
  Matrix in(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t d = 0; d < x.size(); ++d) in(static_cast<Eigen::Index>(d), 0) = x[d];
  auto z = forward_batch(state, layer_layout(state.spec), in);
  const auto& logits = z.back();
  return {logits.data(), logits.data() + logits.size()};
}

ClassId predict(const ModelState& state, std::span<const float> x) {
  auto scores = forward(state, x);
  return static_cast<ClassId>(argmax_lowest(ConstVecMap(scores.data(),
                                                        static_cast<Eigen::Index>(scores.size()))));
}

LossGradient loss_and_gradient(const ModelState& state, const Dataset& data,
                               std::span<const std::size_t> indices) {
  check_state(state);
  check_dim(state, data.dim());
  check_labels(state, data);
  if (indices.empty()) throw ParameterError("loss over an empty batch");

  const auto layout = layer_layout(state.spec);
  const Matrix x = gather(data, indices);
  const auto z = forward_batch(state, layout, x);
  const auto batch = static_cast<double>(indices.size());

  // dL/dlogits = (softmax - onehot) / batch
  Matrix delta = log_softmax(z.back());
  double total = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const auto y = static_cast<Eigen::Index>(data.label(indices[k]));
    total -= delta(y, col);
    delta.col(col) = delta.col(col).array().exp();
    delta(y, col) -= 1.0;
  }
  delta /= batch;

  LossGradient out{total / batch, std::vector<double>(state.params.size(), 0.0)};
  for (std::size_t l = layout.size(); l-- > 0;) {
    const auto& slice = layout[l];
    const Matrix input = l == 0 ? x : Matrix(z[l - 1].cwiseMax(0.0));
    MutMap(out.gradient.data() + slice.weight_offset, static_cast<Eigen::Index>(slice.out),
           static_cast<Eigen::Index>(slice.in)) = delta * input.transpose();
    MutVecMap(out.gradient.data() + slice.bias_offset, static_cast<Eigen::Index>(slice.out)) =
        delta.rowwise().sum();
    if (l > 0) {
      Matrix back = weights(state, slice).transpose() * delta;
      delta = back.cwiseProduct((z[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

double loss(const ModelState& state, const Dataset& data, std::span<const std::size_t> indices) {
  check_state(state);
  check_dim(state, data.dim());
  check_labels(state, data);
  if (indices.empty()) throw ParameterError("loss over an empty batch");
  const auto z = forward_batch(state, layer_layout(state.spec), gather(data, indices));
  const Matrix ls = log_softmax(z.back());
  double total = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    total -= ls(static_cast<Eigen::Index>(data.label(indices[k])), static_cast<Eigen::Index>(k));
  }
  return total / static_cast<double>(indices.size());
}

TrainResult local_train(const ModelState& state, const Dataset& data,
                        std::span<const std::size_t> indices, const TrainConfig& cfg,
                        std::uint64_t seed) {
  cfg.validate();
  check_state(state);
  if (indices.empty()) return {state, TrainStatus::skipped};

  TrainResult result{state, TrainStatus::trained};
  auto& params = result.state.params;
  auto& velocity = result.state.momentum;
  std::vector<std::size_t> order(indices.begin(), indices.end());

  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    auto rng = make_rng(seed, "local_train.shuffle", epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto len = std::min(cfg.batch_size, order.size() - start);
      const auto g = loss_and_gradient(result.state, data,
                                       std::span(order).subspan(start, len));
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p] = cfg.momentum * velocity[p] + g.gradient[p];
        params[p] -= cfg.learning_rate * velocity[p];
      }
    }
  }
  return result;
}

double evaluate(const ModelState& state, const Dataset& test) {
  check_state(state);
  check_dim(state, test.dim());
  if (test.empty()) throw ParameterError("evaluation on an empty test set");

  constexpr std::size_t kChunk = 1024;
  const auto layout = layer_layout(state.spec);
  std::vector<std::size_t> idx;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    const auto len = std::min(kChunk, test.size() - start);
    idx.resize(len);
    std::iota(idx.begin(), idx.end(), start);
    const auto z = forward_batch(state, layout, gather(test, idx));
    const auto& logits = z.back();
    for (std::size_t k = 0; k < len; ++k) {
      if (argmax_lowest(logits.col(static_cast<Eigen::Index>(k))) == test.label(start + k)) {
        ++correct;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

ModelState decavg_aggregate(std::span<const AggregationEntry> inputs) {
  if (inputs.empty()) throw ParameterError("aggregation needs at least one model");
  std::vector<const AggregationEntry*> order;
  for (const auto& e : inputs) {
    if (e.state == nullptr) throw ParameterError("aggregation entry without a model");
    check_state(*e.state);
    order.push_back(&e);
  }
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->node < b->node; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (order[k]->node == order[k - 1]->node) {
      throw ParameterError("node " + std::to_string(order[k]->node) + " aggregated twice");
    }
    if (!(order[k]->state->spec == order[0]->state->spec)) {
      throw ParameterError("aggregation over models of different shapes");
    }
  }

  double total = 0.0;
  for (const auto* e : order) total += static_cast<double>(std::max<std::size_t>(e->dataset_size, 1));

  // Accumulated as an offset from the first model: identical inputs give back
  // exactly that model, and the clamp removes rounding excursions outside the
  // inputs' range.
  const auto& base = order[0]->state->params;
  ModelState out{order[0]->state->spec, base, std::vector<double>(base.size(), 0.0)};
  std::vector<double> lo(base);
  std::vector<double> hi(base);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double alpha = static_cast<double>(std::max<std::size_t>(order[k]->dataset_size, 1)) / total;
    const auto& p = order[k]->state->params;
    for (std::size_t i = 0; i < p.size(); ++i) {
      out.params[i] += alpha * (p[i] - base[i]);
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  for (std::size_t i = 0; i < out.params.size(); ++i) {
    out.params[i] = std::clamp(out.params[i], lo[i], hi[i]);
  }
  return out;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4B435344;  // "DSCK" little-endian

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                        static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const char* field) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError(field, "truncated");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelState& state) {
  check_state(state);
  const auto widths = state.spec.layer_widths();
  put_u32(out, kCheckpointMagic);
  put_u32(out, static_cast<std::uint32_t>(widths.size()));
  for (auto w : widths) put_u32(out, static_cast<std::uint32_t>(w));
  for (double p : state.params) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p)));
}

ModelState read_checkpoint(std::istream& in) {
  if (get_u32(in, "checkpoint.magic") != kCheckpointMagic) {
    throw FormatError("checkpoint.magic", "not a model checkpoint");
  }
  const auto count = get_u32(in, "checkpoint.widths");
  if (count < 2) throw FormatError("checkpoint.widths", "need at least input and output widths");
  std::vector<std::size_t> widths(count);
  for (auto& w : widths) w = get_u32(in, "checkpoint.widths");
  ModelSpec spec{widths.front(), {widths.begin() + 1, widths.end() - 1}, widths.back()};
  try {
    spec.validate();
  } catch (const ParameterError& e) {
    throw FormatError("checkpoint.widths", e.what());
  }
  ModelState s{spec, std::vector<double>(spec.parameter_count()),
               std::vector<double>(spec.parameter_count(), 0.0)};
  for (auto& p : s.params) p = std::bit_cast<float>(get_u32(in, "checkpoint.params"));
  return s;
}

}  // namespace decsim
