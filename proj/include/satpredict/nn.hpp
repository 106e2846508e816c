#pragma once

// Small dense networks for binary run classification.
//
//   A: input -> 1                       (logistic unit)
//   B: input -> ceil(input/2) -> 1      (ReLU hidden layer)
//   C: as B, with inverted dropout on the inputs of both dense layers
//
// Output is always a single sigmoid unit trained with binary cross-entropy
// by plain mini-batch gradient descent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "satpredict/dataset.hpp"
#include "satpredict/error.hpp"
#include "satpredict/features.hpp"
#include "satpredict/rng.hpp"
#include "satpredict/trace.hpp"

namespace satpredict {

enum class ArchId : std::uint8_t { A, B, C };

inline std::string_view arch_name(ArchId a) {
  switch (a) {
    case ArchId::A: return "A";
    case ArchId::B: return "B";
    case ArchId::C: return "C";
  }
  return "?";
}

inline ArchId arch_from_name(std::string_view s) {
  if (s == "A") return ArchId::A;
  if (s == "B") return ArchId::B;
  if (s == "C") return ArchId::C;
  throw Error(Errc::BadConfig, "unknown architecture '" + std::string(s) + "'");
}

struct Architecture {
  ArchId id = ArchId::A;
  std::size_t input_dim = 0;

  std::size_t hidden_width() const { return (input_dim + 1) / 2; }

  /// Unit counts from the input through the output layer.
  std::vector<std::size_t> widths() const {
    if (id == ArchId::A) return {input_dim, 1};
    return {input_dim, hidden_width(), 1};
  }

  bool operator==(const Architecture&) const = default;
};

/// Fully connected layer; weights are row-major, one row per output unit.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
  bool operator==(const DenseLayer&) const = default;
};

struct Model {
  Architecture arch;
  std::vector<DenseLayer> layers;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }
  bool operator==(const Model&) const = default;
};

inline void check_dropout(ArchId arch, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw Error(Errc::BadDropout, "dropout rate " + text::format_double(p) + " outside [0, 1)");
  if (arch != ArchId::C && p != 0.0)
    throw Error(Errc::BadDropout, "architecture " + std::string(arch_name(arch)) + " has no dropout");
}

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
inline Model build_model(ArchId arch, std::size_t input_dim, double dropout_rate, std::uint64_t seed) {
  if (input_dim < 1) throw Error(Errc::BadConfig, "input_dim must be >= 1");
  check_dropout(arch, dropout_rate);
  Model m{{arch, input_dim}, {}, dropout_rate, seed};
  Rng rng(seed);
  const auto widths = m.arch.widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer{widths[l], widths[l + 1], {}, std::vector<double>(widths[l + 1], 0.0)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.weights.resize(layer.in * layer.out);
    for (auto& w : layer.weights) w = (2.0 * rng.uniform() - 1.0) * bound;
    m.layers.push_back(std::move(layer));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

enum class Mode : std::uint8_t { Train, Infer };

/// Per-layer input scale factors (0 for dropped units, 1/(1-p) for kept ones).
/// An empty entry means the layer's inputs pass through unchanged.
using DropoutMasks = std::vector<std::vector<double>>;

inline DropoutMasks sample_masks(const Model& m, Rng& rng) {
  DropoutMasks masks(m.layers.size());
  if (m.arch.id != ArchId::C || m.dropout_rate == 0.0) return masks;
  const double keep_scale = 1.0 / (1.0 - m.dropout_rate);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    masks[l].resize(m.layers[l].in);
    for (auto& s : masks[l]) s = rng.bernoulli(m.dropout_rate) ? 0.0 : keep_scale;
  }
  return masks;
}

inline double sigmoid(double z) {
  const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

struct Activations {
  std::vector<std::vector<double>> inputs;  // input of each layer, after dropout
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
  double probability = 0.5;
};

inline void check_input(const Model& m, std::span<const double> x) {
  if (x.size() != m.arch.input_dim)
    throw Error(Errc::DimensionMismatch, "input has " + std::to_string(x.size()) + " dims, model expects " +
                                             std::to_string(m.arch.input_dim));
}

inline Activations forward_pass(const Model& m, std::span<const double> x, const DropoutMasks& masks) {
  check_input(m, x);
  Activations a;
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    if (l < masks.size() && !masks[l].empty())
      for (std::size_t i = 0; i < cur.size(); ++i) cur[i] *= masks[l][i];
    std::vector<double> z(layer.bias);
    for (std::size_t o = 0; o < layer.out; ++o)
      for (std::size_t i = 0; i < layer.in; ++i) z[o] += layer.w(o, i) * cur[i];
    a.inputs.push_back(std::move(cur));
    cur = z;
    if (l + 1 < m.layers.size())
      for (auto& v : cur) v = std::max(v, 0.0);
    a.pre.push_back(std::move(z));
  }
  a.probability = sigmoid(a.pre.back().front());
  return a;
}

/// Probability of class 1. Infer mode never touches `rng` and is deterministic.
inline double forward(const Model& m, std::span<const double> x, Mode mode, Rng& rng) {
  const DropoutMasks masks = mode == Mode::Train ? sample_masks(m, rng) : DropoutMasks{};
  return forward_pass(m, x, masks).probability;
}

inline double forward(const Model& m, std::span<const double> x) {
  return forward_pass(m, x, {}).probability;
}

inline constexpr double kLossEpsilon = 1e-12;

inline double bce_loss(double p, Label y) {
  p = std::clamp(p, kLossEpsilon, 1.0 - kLossEpsilon);
  return y == Label::Timely ? -std::log(p) : -std::log(1.0 - p);
}

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
  double loss = 0.0;  // mean loss over the batch
};

inline Gradients zero_gradients(const Model& m) {
  Gradients g;
  for (const auto& l : m.layers) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

struct Sample {
  std::span<const double> x;
  Label y = Label::NotTimely;
};

// Adds one example's loss gradient to `g` (unscaled).
inline void accumulate_gradient(const Model& m, std::span<const double> x, Label y, const DropoutMasks& masks,
                                Gradients& g) {
  const auto a = forward_pass(m, x, masks);
  g.loss += bce_loss(a.probability, y);
  std::vector<double> delta = {a.probability - (y == Label::Timely ? 1.0 : 0.0)};
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    const auto& layer = m.layers[l];
    const auto& input = a.inputs[l];
    for (std::size_t o = 0; o < layer.out; ++o) {
      g.bias[l][o] += delta[o];
      for (std::size_t i = 0; i < layer.in; ++i) g.weights[l][o * layer.in + i] += delta[o] * input[i];
    }
    if (l == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    const auto& z_prev = a.pre[l - 1];
    for (std::size_t i = 0; i < layer.in; ++i) {
      if (z_prev[i] <= 0.0) continue;
      double s = 0.0;
      for (std::size_t o = 0; o < layer.out; ++o) s += layer.w(o, i) * delta[o];
      if (!masks.empty() && !masks[l].empty()) s *= masks[l][i];
      prev[i] = s;
    }
    delta = std::move(prev);
  }
}

inline void scale(Gradients& g, double factor) {
  for (auto& v : g.weights)
    for (auto& x : v) x *= factor;
  for (auto& v : g.bias)
    for (auto& x : v) x *= factor;
  g.loss *= factor;
}

/// Gradient of one example's loss under a fixed dropout mask.
inline Gradients backward_with_masks(const Model& m, std::span<const double> x, Label y, const DropoutMasks& masks) {
  auto g = zero_gradients(m);
  accumulate_gradient(m, x, y, masks, g);
  return g;
}

inline double loss_with_masks(const Model& m, std::span<const double> x, Label y, const DropoutMasks& masks) {
  return bce_loss(forward_pass(m, x, masks).probability, y);
}

/// Mean-over-batch gradients. Architecture C draws one mask per example from
/// `rng` and uses it for both the forward and the backward pass.
inline Gradients backward(const Model& m, std::span<const Sample> batch, Rng& rng) {
  auto g = zero_gradients(m);
  if (batch.empty()) return g;
  for (const auto& s : batch) {
    check_input(m, s.x);
    accumulate_gradient(m, s.x, s.y, sample_masks(m, rng), g);
  }
  scale(g, 1.0 / static_cast<double>(batch.size()));
  return g;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  std::optional<double> dropout_rate;  // overrides the model's rate (arch C)
  bool normalize = true;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  bool operator==(const EpochStats&) const = default;
};

inline Label decide(double probability, double threshold) {
  return probability >= threshold ? Label::Timely : Label::NotTimely;
}

/// Trains in place; returns one entry per epoch measured in infer mode over
/// the whole training set after that epoch's updates.
inline std::vector<EpochStats> fit(Model& m, std::span<const Sample> samples, const TrainConfig& cfg) {
  if (samples.empty()) throw Error(Errc::EmptyDataset, "no training samples");
  if (cfg.batch_size < 1 || cfg.batch_size > samples.size())
    throw Error(Errc::BadConfig, "batch size must be in [1, " + std::to_string(samples.size()) + "]");
  if (!(cfg.learning_rate > 0.0)) throw Error(Errc::BadConfig, "learning rate must be > 0");
  for (const auto& s : samples) check_input(m, s.x);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<EpochStats> history;
  history.reserve(cfg.epochs);
  std::vector<Sample> batch;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(samples[order[k]]);
      const auto g = backward(m, batch, rng);
      for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& layer = m.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= cfg.learning_rate * g.weights[l][i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= cfg.learning_rate * g.bias[l][i];
      }
    }
    EpochStats stats{epoch, 0.0, 0.0};
    std::size_t correct = 0;
    for (const auto& s : samples) {
      const double p = forward(m, s.x);
      stats.loss += bce_loss(p, s.y);
      correct += decide(p, 0.5) == s.y;
    }
    stats.loss /= static_cast<double>(samples.size());
    stats.train_acc = static_cast<double>(correct) / static_cast<double>(samples.size());
    history.push_back(stats);
  }
  return history;
}

struct TrainedModel {
  Model model;
  Normalizer normalizer;
  FeatureSetSpec spec;
  std::vector<EpochStats> history;

  bool operator==(const TrainedModel&) const = default;
};

inline TrainedModel train(Model model, const Dataset& ds, const TrainConfig& cfg) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "training dataset is empty");
  const std::size_t dim = model.arch.input_dim;
  for (const auto& e : ds.examples)
    if (e.features.size() != dim)
      throw Error(Errc::DimensionMismatch, "example '" + e.run_id + "' has " + std::to_string(e.features.size()) +
                                               " features, model expects " + std::to_string(dim));
  if (cfg.dropout_rate) {
    check_dropout(model.arch.id, *cfg.dropout_rate);
    model.dropout_rate = *cfg.dropout_rate;
  }

  TrainedModel tm{std::move(model), Normalizer::identity(dim), ds.spec, {}};
  if (cfg.normalize && !ds.normalized) {
    std::vector<FeatureVector> raw;
    raw.reserve(ds.size());
    for (const auto& e : ds.examples) raw.push_back(e.features);
    tm.normalizer = fit_normalizer(raw);
  }

  std::vector<FeatureVector> inputs;
  inputs.reserve(ds.size());
  for (const auto& e : ds.examples) inputs.push_back(apply_normalizer(tm.normalizer, e.features));
  std::vector<Sample> samples;
  samples.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) samples.push_back({inputs[i].values, ds.examples[i].label});

  if (cfg.epochs > 0) tm.history = fit(tm.model, samples, cfg);
  return tm;
}

// ---------------------------------------------------------------------------
// Prediction

struct Prediction {
  Label label = Label::NotTimely;
  double probability = 0.5;
  bool operator==(const Prediction&) const = default;
};

inline void check_consistency(const TrainedModel& tm) {
  const std::size_t dim = tm.model.arch.input_dim;
  if (tm.spec.dimension() != dim || tm.normalizer.dimension() != dim || tm.normalizer.stddev.size() != dim)
    throw Error(Errc::SpecMismatch, "feature spec, normalizer and model input disagree on dimension");
}

/// Classifies raw (unnormalized) features; ties at the threshold go to class 1.
inline Prediction predict_features(const TrainedModel& tm, const FeatureVector& raw, double threshold = 0.5) {
  check_consistency(tm);
  const auto x = apply_normalizer(tm.normalizer, raw);
  const double p = forward(tm.model, x.values);
  return {decide(p, threshold), p};
}

inline Prediction predict(const TrainedModel& tm, const RunTrace& trace, double threshold = 0.5) {
  check_consistency(tm);
  return predict_features(tm, extract_features(trace, tm.spec), threshold);
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr int kModelSchemaVersion = 1;

inline nlohmann::json model_to_json(const TrainedModel& tm) {
  using nlohmann::json;
  json layers = json::array();
  for (const auto& l : tm.model.layers) {
    json rows = json::array();
    for (std::size_t o = 0; o < l.out; ++o) {
      json row = json::array();
      for (std::size_t i = 0; i < l.in; ++i) row.push_back(l.w(o, i));
      rows.push_back(std::move(row));
    }
    layers.push_back({{"W", std::move(rows)}, {"b", l.bias}});
  }
  json history = json::array();
  for (const auto& h : tm.history) history.push_back({{"epoch", h.epoch}, {"loss", h.loss}, {"train_acc", h.train_acc}});
  return {
      {"schema_version", kModelSchemaVersion},
      {"arch_id", arch_name(tm.model.arch.id)},
      {"input_dim", tm.model.arch.input_dim},
      {"dropout_rate", tm.model.dropout_rate},
      {"seed", tm.model.seed},
      {"layers", std::move(layers)},
      {"normalizer", {{"mean", tm.normalizer.mean}, {"std", tm.normalizer.stddev}}},
      {"spec", {{"set_id", feature_set_name(tm.spec.set)}, {"K", tm.spec.iterations}}},
      {"history", std::move(history)},
  };
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error(Errc::CorruptModel, "model is not a JSON object");
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kModelSchemaVersion)
      throw Error(Errc::SchemaVersionMismatch, "expected schema_version " + std::to_string(kModelSchemaVersion));
    TrainedModel tm;
    tm.model.arch.id = arch_from_name(j.at("arch_id").get<std::string>());
    tm.model.arch.input_dim = j.at("input_dim").get<std::size_t>();
    tm.model.dropout_rate = j.at("dropout_rate").get<double>();
    tm.model.seed = j.value("seed", std::uint64_t{0});
    check_dropout(tm.model.arch.id, tm.model.dropout_rate);

    const auto widths = tm.model.arch.widths();
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() + 1 != widths.size())
      throw Error(Errc::CorruptModel, "layer count does not match architecture");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      DenseLayer layer{widths[l], widths[l + 1], {}, layers[l].at("b").get<std::vector<double>>()};
      const auto rows = layers[l].at("W").get<std::vector<std::vector<double>>>();
      if (rows.size() != layer.out || layer.bias.size() != layer.out)
        throw Error(Errc::CorruptModel, "layer " + std::to_string(l) + " has the wrong shape");
      for (const auto& row : rows) {
        if (row.size() != layer.in) throw Error(Errc::CorruptModel, "layer " + std::to_string(l) + " has the wrong shape");
        layer.weights.insert(layer.weights.end(), row.begin(), row.end());
      }
      tm.model.layers.push_back(std::move(layer));
    }
    tm.normalizer.mean = j.at("normalizer").at("mean").get<std::vector<double>>();
    tm.normalizer.stddev = j.at("normalizer").at("std").get<std::vector<double>>();
    tm.spec.set = feature_set_from_name(j.at("spec").at("set_id").get<std::string>());
    tm.spec.iterations = j.at("spec").at("K").get<std::size_t>();
    for (const auto& h : j.at("history"))
      tm.history.push_back({h.at("epoch").get<std::size_t>(), h.at("loss").get<double>(), h.at("train_acc").get<double>()});
    try {
      check_consistency(tm);
    } catch (const Error& e) {
      throw Error(Errc::CorruptModel, e.what());
    }
    return tm;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::SchemaVersionMismatch || e.code() == Errc::CorruptModel) throw;
    throw Error(Errc::CorruptModel, e.what());
  }
}

inline std::string serialize_model(const TrainedModel& tm) { return model_to_json(tm).dump(2) + "\n"; }

inline TrainedModel parse_model(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, e.what());
  }
  return model_from_json(j);
}

inline void save_model(const TrainedModel& tm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path + "' for writing");
  out << serialize_model(tm);
  if (!out) throw Error(Errc::Io, "write to '" + path + "' failed");
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace satpredict
