#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "satpredict/nn.hpp"
#include "support/oracles.hpp"

using namespace satpredict;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::Io;
}

Model zeroed(Model m) {
  for (auto& l : m.layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return m;
}

TrainedModel wrap(Model m, FeatureSetSpec spec) {
  const auto dim = m.arch.input_dim;
  return {std::move(m), Normalizer::identity(dim), spec, {}};
}

// One Set-1 iteration per point; rows must have six columns.
Dataset dataset_from(const oracle::Toy& toy, const std::vector<std::vector<double>>& x) {
  Dataset ds;
  ds.spec = {FeatureSet::Set1, 1};
  for (std::size_t i = 0; i < x.size(); ++i) ds.examples.push_back({{x[i]}, toy.y[i], "p" + std::to_string(i)});
  return ds;
}

}  // namespace

TEST(Architecture, HiddenWidthIsHalfTheInput) {
  const auto b12 = build_model(ArchId::B, 12, 0, 1);
  ASSERT_EQ(b12.layers.size(), 2u);
  EXPECT_EQ(b12.layers[0].in, 12u);
  EXPECT_EQ(b12.layers[0].out, 6u);
  EXPECT_EQ(b12.layers[1].out, 1u);
  const auto b14 = build_model(ArchId::B, 14, 0, 1);
  EXPECT_EQ(b14.arch.widths(), (std::vector<std::size_t>{14, 7, 1}));
  const auto a12 = build_model(ArchId::A, 12, 0, 1);
  ASSERT_EQ(a12.layers.size(), 1u);
  EXPECT_EQ(a12.parameter_count(), 13u);
  EXPECT_EQ(build_model(ArchId::C, 12, 0.2, 1).arch.widths(), (std::vector<std::size_t>{12, 6, 1}));
}

TEST(Architecture, InitializationBounds) {
  const auto m = build_model(ArchId::B, 9, 0, 42);
  for (const auto& l : m.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (double w : l.weights) EXPECT_LE(std::abs(w), bound);
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
  }
  EXPECT_EQ(build_model(ArchId::B, 9, 0, 42), m);
  EXPECT_NE(build_model(ArchId::B, 9, 0, 43), m);
}

TEST(Architecture, DropoutValidation) {
  EXPECT_EQ(code_of([] { build_model(ArchId::C, 4, 1.0, 1); }), Errc::BadDropout);
  EXPECT_EQ(code_of([] { build_model(ArchId::C, 4, -0.1, 1); }), Errc::BadDropout);
  EXPECT_EQ(code_of([] { build_model(ArchId::B, 4, 0.2, 1); }), Errc::BadDropout);
  EXPECT_NO_THROW(build_model(ArchId::C, 4, 0.0, 1));
}

TEST(Forward, ZeroWeightsGiveHalf) {
  Rng rng(1);
  for (ArchId a : {ArchId::A, ArchId::B, ArchId::C}) {
    const auto m = zeroed(build_model(a, 5, a == ArchId::C ? 0.3 : 0.0, 1));
    const std::vector<double> x = {1, -2, 3, 0.5, 9};
    EXPECT_EQ(forward(m, x), 0.5);
    EXPECT_EQ(forward(m, x, Mode::Train, rng), 0.5);
  }
  const auto tm = wrap(zeroed(build_model(ArchId::B, 12, 0, 1)), {FeatureSet::Set1, 2});
  const auto pred = predict_features(tm, {std::vector<double>(12, 3.0)});
  EXPECT_EQ(pred.probability, 0.5);
  EXPECT_EQ(pred.label, Label::Timely);
}

TEST(Forward, ThresholdDecides) {
  auto m = zeroed(build_model(ArchId::A, 6, 0, 1));
  m.layers[0].bias[0] = std::log(0.6 / 0.4);
  const auto tm = wrap(m, {FeatureSet::Set1, 1});
  const FeatureVector x{std::vector<double>(6, 1.0)};
  EXPECT_NEAR(predict_features(tm, x).probability, 0.6, 1e-12);
  EXPECT_EQ(predict_features(tm, x, 0.9).label, Label::NotTimely);
  EXPECT_EQ(predict_features(tm, x, 0.5).label, Label::Timely);
}

TEST(Forward, InferIsDeterministicAndChecksDimension) {
  const auto m = build_model(ArchId::C, 4, 0.5, 3);
  const std::vector<double> x = {0.1, 0.2, -0.3, 0.4};
  EXPECT_EQ(forward(m, x), forward(m, x));
  Rng a(1), b(99);
  EXPECT_EQ(forward(m, x, Mode::Infer, a), forward(m, x, Mode::Infer, b));
  const std::vector<double> short_x = {1, 2};
  EXPECT_EQ(code_of([&] { forward(m, short_x); }), Errc::DimensionMismatch);
}

TEST(Forward, OutputStaysInOpenInterval) {
  auto m = build_model(ArchId::A, 1, 0, 1);
  m.layers[0].weights[0] = 1.0;
  for (double x : {-1e6, -800.0, 0.0, 800.0, 1e6}) {
    const double p = forward(m, std::vector<double>{x});
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Forward, ArchCWithoutDropoutMatchesB) {
  const auto b = build_model(ArchId::B, 6, 0, 11);
  auto c = build_model(ArchId::C, 6, 0, 11);
  EXPECT_EQ(b.layers, c.layers);
  std::mt19937_64 g(1);
  Rng rb(5), rc(5);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(6);
    for (auto& v : x) v = oracle::draw(g, -3, 3);
    EXPECT_EQ(forward(b, x, Mode::Train, rb), forward(c, x, Mode::Train, rc));
  }
  const auto toy = oracle::linear_toy(3, 60);
  const auto x = oracle::lift(toy, 3);
  const auto samples = oracle::samples_of(x, toy.y);
  auto tb = b;
  TrainConfig cfg{20, 8, 0.3, 4, std::nullopt, true};
  const auto hb = fit(tb, samples, cfg);
  const auto hc = fit(c, samples, cfg);
  EXPECT_EQ(tb.layers, c.layers);
  EXPECT_EQ(hb, hc);
}

TEST(Loss, BinaryCrossEntropy) {
  EXPECT_NEAR(bce_loss(0.5, Label::Timely), 0.693147, 1e-6);
  EXPECT_NEAR(bce_loss(0.9, Label::NotTimely), 2.302585, 1e-6);
  EXPECT_NEAR(bce_loss(1.0 - 1e-12, Label::Timely), 0.0, 1e-11);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, Label::Timely)));
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, Label::NotTimely)));
  for (double p : {0.0, 1e-300, 0.3, 0.999, 1.0}) {
    EXPECT_GE(bce_loss(p, Label::Timely), 0.0);
    EXPECT_GE(bce_loss(p, Label::NotTimely), 0.0);
  }
}

TEST(Gradients, HandSizedLogisticUnit) {
  auto m = build_model(ArchId::A, 2, 0, 1);
  m.layers[0].weights = {0.3, -0.7};
  m.layers[0].bias = {0.1};
  const std::vector<double> x = {1.5, -0.5};
  const auto check = oracle::check_gradients(m, x, Label::Timely, {});
  EXPECT_EQ(check.checked, 3u);
  EXPECT_EQ(check.failures, 0u) << check.worst_relative;
  // closed form: dL/dz = p - y
  const double p = 1.0 / (1.0 + std::exp(-(0.3 * 1.5 + 0.7 * 0.5 + 0.1)));
  const auto g = backward_with_masks(m, x, Label::Timely, {});
  EXPECT_NEAR(g.bias[0][0], p - 1.0, 1e-15);
  EXPECT_NEAR(g.weights[0][0], (p - 1.0) * 1.5, 1e-15);
}

TEST(Gradients, RandomNetworksMatchFiniteDifferences) {
  std::mt19937_64 g(2024);
  for (ArchId arch : {ArchId::A, ArchId::B, ArchId::C}) {
    for (int n = 0; n < 50; ++n) {
      const auto dim = std::uniform_int_distribution<std::size_t>(2, 5)(g);
      auto m = build_model(arch, dim, arch == ArchId::C ? 0.3 : 0.0, g());
      for (auto& l : m.layers)
        for (auto& b : l.bias) b = oracle::draw(g, -0.5, 0.5);
      Rng rng(g());
      const auto masks = arch == ArchId::C ? sample_masks(m, rng) : DropoutMasks{};
      std::vector<double> x(dim);
      do {
        for (auto& v : x) v = oracle::draw(g, -2, 2);
      } while (!oracle::away_from_kinks(m, x, masks));
      const Label y = g() % 2 ? Label::Timely : Label::NotTimely;
      const auto check = oracle::check_gradients(m, x, y, masks);
      EXPECT_EQ(check.failures, 0u) << arch_name(arch) << " net " << n << " worst " << check.worst_relative;
      EXPECT_EQ(check.checked, m.parameter_count());
    }
  }
}

TEST(Gradients, DuplicatedBatchEqualsSingleExample) {
  const auto m = build_model(ArchId::B, 4, 0, 8);
  const std::vector<double> x = {0.5, -1, 2, 0.25};
  const Sample s{x, Label::Timely};
  Rng r1(1), r2(1);
  const std::vector<Sample> one = {s}, two = {s, s};
  const auto g1 = backward(m, one, r1);
  const auto g2 = backward(m, two, r2);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (std::size_t i = 0; i < g1.weights[l].size(); ++i) EXPECT_DOUBLE_EQ(g1.weights[l][i], g2.weights[l][i]);
    for (std::size_t i = 0; i < g1.bias[l].size(); ++i) EXPECT_DOUBLE_EQ(g1.bias[l][i], g2.bias[l][i]);
  }
}

TEST(Gradients, DropoutMaskIsSharedWithForwardPass) {
  // A single kept input: the gradient of a dropped input's weight is zero.
  auto m = build_model(ArchId::C, 3, 0.5, 1);
  DropoutMasks masks = {{2.0, 0.0, 2.0}, {0.0, 2.0}};
  const std::vector<double> x = {1, 1, 1};
  const auto g = backward_with_masks(m, x, Label::Timely, masks);
  for (std::size_t o = 0; o < m.layers[0].out; ++o) EXPECT_EQ(g.weights[0][o * 3 + 1], 0.0);
  EXPECT_EQ(g.weights[1][0], 0.0);
}

TEST(Training, LinearlySeparableToy) {
  const auto toy = oracle::linear_toy(1, 200);
  ASSERT_EQ(oracle::best_linear_accuracy(toy), 1.0);
  auto m = build_model(ArchId::A, 2, 0, 1);
  const auto samples = oracle::samples_of(toy.x, toy.y);
  const auto history = fit(m, samples, {200, 16, 0.5, 1, std::nullopt, true});
  EXPECT_EQ(history.size(), 200u);
  EXPECT_GE(history.back().train_acc, 0.99);
  EXPECT_GE(oracle::accuracy(m, toy.x, toy.y), 0.99);
}

TEST(Training, XorDefeatsLinearModel) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto toy = oracle::xor_clusters(seed);
    const double bound = oracle::best_linear_accuracy(toy);
    EXPECT_LE(bound, 0.75);
    const auto x = oracle::lift(toy, 6);
    auto a = build_model(ArchId::A, 12, 0, seed);
    const auto h = fit(a, oracle::samples_of(x, toy.y), {300, 16, 0.5, seed, std::nullopt, true});
    double best = 0;
    for (const auto& e : h) best = std::max(best, e.train_acc);
    EXPECT_LE(best, bound + 1e-12);
  }
}

TEST(Training, HiddenLayerSolvesXor) {
  int passing = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto toy = oracle::xor_clusters(seed);
    const auto x = oracle::lift(toy, 6);
    auto b = build_model(ArchId::B, 12, 0, seed);
    const auto h = fit(b, oracle::samples_of(x, toy.y), {2000, 16, 0.5, seed, std::nullopt, true});
    passing += h.back().train_acc >= 0.95;
  }
  EXPECT_GE(passing, 4);
}

TEST(Training, ZeroEpochsKeepsInitialWeights) {
  const auto toy = oracle::linear_toy(2, 20);
  const auto m = build_model(ArchId::B, 6, 0, 5);
  const auto tm = train(m, dataset_from(toy, oracle::lift(toy, 3)), {0, 4, 0.1, 1, std::nullopt, false});
  EXPECT_EQ(tm.model, m);
  EXPECT_TRUE(tm.history.empty());
}

TEST(Training, Deterministic) {
  const auto toy = oracle::xor_clusters(9, 10);
  const auto ds = dataset_from(toy, oracle::lift(toy, 3));
  const TrainConfig cfg{40, 8, 0.2, 77, 0.25, true};
  const auto m = build_model(ArchId::C, 6, 0.1, 3);
  const auto a = train(m, ds, cfg);
  const auto b = train(m, ds, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
  EXPECT_EQ(a.model.dropout_rate, 0.25);
}

TEST(Training, ConfigValidation) {
  const auto toy = oracle::linear_toy(2, 10);
  const auto ds = dataset_from(toy, oracle::lift(toy, 3));
  const auto m = build_model(ArchId::A, 6, 0, 5);
  EXPECT_EQ(code_of([&] { train(m, ds, {5, 11, 0.1, 1, std::nullopt, true}); }), Errc::BadConfig);
  EXPECT_EQ(code_of([&] { train(m, ds, {5, 0, 0.1, 1, std::nullopt, true}); }), Errc::BadConfig);
  EXPECT_EQ(code_of([&] { train(m, ds, {5, 2, 0.0, 1, std::nullopt, true}); }), Errc::BadConfig);
  EXPECT_EQ(code_of([&] { train(m, Dataset{}, {}); }), Errc::EmptyDataset);
  EXPECT_EQ(code_of([&] { train(build_model(ArchId::A, 3, 0, 1), ds, {}); }), Errc::DimensionMismatch);
  EXPECT_EQ(code_of([&] { train(m, ds, {5, 2, 0.1, 1, 0.3, true}); }), Errc::BadDropout);
}

TEST(Training, HistoryMatchesFinalModel) {
  const auto toy = oracle::linear_toy(4, 80);
  const auto ds = dataset_from(toy, oracle::lift(toy, 3));
  const auto tm = train(build_model(ArchId::B, 6, 0, 2), ds, {25, 10, 0.3, 2, std::nullopt, true});
  std::size_t ok = 0;
  double loss = 0;
  for (const auto& e : ds.examples) {
    const auto p = predict_features(tm, e.features);
    ok += p.label == e.label;
    loss += bce_loss(p.probability, e.label);
  }
  EXPECT_DOUBLE_EQ(tm.history.back().train_acc, static_cast<double>(ok) / static_cast<double>(ds.size()));
  EXPECT_NEAR(tm.history.back().loss, loss / static_cast<double>(ds.size()), 1e-12);
}

TEST(Prediction, InvariantUnderPositiveRescaling) {
  std::mt19937_64 g(12);
  const auto toy = oracle::xor_clusters(12, 20);
  const auto x = oracle::lift(toy, 3);
  std::vector<double> scale(6);
  for (auto& s : scale) s = std::exp(oracle::draw(g, -5, 5));
  std::vector<std::vector<double>> scaled = x;
  for (auto& row : scaled)
    for (std::size_t d = 0; d < 6; ++d) row[d] *= scale[d];
  const TrainConfig cfg{100, 8, 0.3, 1, std::nullopt, true};
  const auto a = train(build_model(ArchId::B, 6, 0, 1), dataset_from(toy, x), cfg);
  const auto b = train(build_model(ArchId::B, 6, 0, 1), dataset_from(toy, scaled), cfg);
  const auto probe = oracle::xor_clusters(99, 25);
  for (const auto& p : oracle::lift(probe, 3)) {
    auto q = p;
    for (std::size_t d = 0; d < 6; ++d) q[d] *= scale[d];
    EXPECT_EQ(predict_features(a, {p}).label, predict_features(b, {q}).label);
  }
}

TEST(Prediction, SpecMismatch) {
  auto tm = wrap(build_model(ArchId::A, 12, 0, 1), {FeatureSet::Set2, 2});
  EXPECT_EQ(code_of([&] { predict_features(tm, {std::vector<double>(12, 1.0)}); }), Errc::SpecMismatch);
}

TEST(Persistence, RoundTripRandomModels) {
  std::mt19937_64 g(77);
  for (int rep = 0; rep < 100; ++rep) {
    const ArchId arch = static_cast<ArchId>(g() % 3);
    const FeatureSetSpec spec{g() % 2 ? FeatureSet::Set1 : FeatureSet::Set2,
                              std::uniform_int_distribution<std::size_t>(1, 3)(g)};
    const auto dim = spec.dimension();
    auto m = build_model(arch, dim, arch == ArchId::C ? oracle::draw(g, 0, 0.9) : 0.0, g());
    for (auto& l : m.layers)
      for (auto& b : l.bias) b = oracle::draw(g, -1, 1);
    TrainedModel tm{m, {}, spec, {}};
    for (std::size_t d = 0; d < dim; ++d) {
      tm.normalizer.mean.push_back(oracle::draw(g, -1e4, 1e4));
      tm.normalizer.stddev.push_back(std::exp(oracle::draw(g, -5, 8)));
    }
    for (std::size_t e = 1; e <= g() % 5; ++e) tm.history.push_back({e, oracle::draw(g, 0, 2), oracle::draw(g, 0, 1)});
    const auto back = parse_model(serialize_model(tm));
    ASSERT_EQ(back, tm);
    const FeatureVector probe{std::vector<double>(dim, 0.25)};
    EXPECT_EQ(predict_features(back, probe), predict_features(tm, probe));
  }
}

TEST(Persistence, FileRoundTripAndErrors) {
  const auto tm = wrap(build_model(ArchId::B, 12, 0, 1), {FeatureSet::Set1, 2});
  const auto path = ::testing::TempDir() + "model_roundtrip.json";
  save_model(tm, path);
  EXPECT_EQ(load_model(path), tm);

  auto j = model_to_json(tm);
  j["schema_version"] = 2;
  EXPECT_EQ(code_of([&] { parse_model(j.dump()); }), Errc::SchemaVersionMismatch);
  const auto body = serialize_model(tm);
  EXPECT_EQ(code_of([&] { parse_model(body.substr(0, body.size() / 2)); }), Errc::CorruptModel);
  auto bad = model_to_json(tm);
  bad["layers"][0]["b"] = {1.0};
  EXPECT_EQ(code_of([&] { parse_model(bad.dump()); }), Errc::CorruptModel);
  auto mismatch = model_to_json(tm);
  mismatch["spec"]["set_id"] = "set2";
  EXPECT_EQ(code_of([&] { parse_model(mismatch.dump()); }), Errc::CorruptModel);
  EXPECT_EQ(code_of([&] { load_model(path + ".missing"); }), Errc::Io);
}

TEST(Persistence, JsonLayout) {
  const auto tm = wrap(build_model(ArchId::B, 12, 0, 1), {FeatureSet::Set1, 2});
  const auto j = model_to_json(tm);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("arch_id"), "B");
  EXPECT_EQ(j.at("layers").size(), 2u);
  EXPECT_EQ(j.at("layers")[0].at("W").size(), 6u);
  EXPECT_EQ(j.at("layers")[0].at("W")[0].size(), 12u);
  EXPECT_EQ(j.at("spec").at("K"), 2);
  EXPECT_EQ(j.at("spec").at("set_id"), "set1");
}
