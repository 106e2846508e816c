#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "satpredict/eval.hpp"
#include "support/oracles.hpp"

using namespace satpredict;

namespace {

std::vector<Label> random_labels(std::mt19937_64& g, std::size_t n) {
  std::vector<Label> out(n);
  for (auto& l : out) l = g() % 2 ? Label::Timely : Label::NotTimely;
  return out;
}

// Arch A unit that answers 1 iff feature 0 is positive.
TrainedModel sign_model(FeatureSetSpec spec) {
  auto m = build_model(ArchId::A, spec.dimension(), 0, 1);
  std::fill(m.layers[0].weights.begin(), m.layers[0].weights.end(), 0.0);
  m.layers[0].weights[0] = 50.0;
  return {m, Normalizer::identity(spec.dimension()), spec, {{1, 0.3, 0.875}}};
}

Dataset sign_dataset(std::mt19937_64& g, std::size_t n, FeatureSetSpec spec, double flip_rate) {
  Dataset ds;
  ds.spec = spec;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector v;
    for (std::size_t d = 0; d < spec.dimension(); ++d) v.values.push_back(oracle::draw(g, -1, 1));
    Label l = v[0] > 0 ? Label::Timely : Label::NotTimely;
    if (oracle::draw(g, 0, 1) < flip_rate) l = l == Label::Timely ? Label::NotTimely : Label::Timely;
    ds.examples.push_back({v, l, "e" + std::to_string(i)});
  }
  return ds;
}

}  // namespace

TEST(Tally, PerfectPredictor) {
  std::mt19937_64 g(1);
  const auto truth = random_labels(g, 40);
  const auto r = tally(truth, truth);
  EXPECT_EQ(r.hit_ratio, 1.0);
  EXPECT_EQ(r.confusion.fp, 0u);
  EXPECT_EQ(r.confusion.fn, 0u);
}

TEST(Tally, ConstantPredictorOnBalancedSet) {
  std::vector<Label> truth(30, Label::Timely);
  truth.resize(60, Label::NotTimely);
  const std::vector<Label> ones(60, Label::Timely);
  const auto r = tally(truth, ones);
  EXPECT_EQ(r.hit_ratio, 0.5);
  EXPECT_EQ(r.confusion, (Confusion{30, 30, 0, 0}));
}

TEST(Tally, SeventyFiveRunHitRatio) {
  std::vector<Label> truth(75, Label::Timely), said(75, Label::Timely);
  for (std::size_t i = 0; i < 7; ++i) said[i] = Label::NotTimely;
  const auto r = tally(truth, said);
  EXPECT_EQ(r.n_test, 75u);
  EXPECT_NEAR(r.hit_ratio, 0.9067, 5e-5);
  EXPECT_EQ(r.hit_ratio, 68.0 / 75.0);
}

TEST(Tally, FlippingOnePredictionMovesOneCount) {
  std::mt19937_64 g(2);
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 50)(g);
    const auto truth = random_labels(g, n);
    auto said = random_labels(g, n);
    const auto before = tally(truth, said);
    EXPECT_EQ(before.confusion.total(), n);
    EXPECT_GE(before.hit_ratio, 0.0);
    EXPECT_LE(before.hit_ratio, 1.0);
    const auto i = std::uniform_int_distribution<std::size_t>(0, n - 1)(g);
    said[i] = said[i] == Label::Timely ? Label::NotTimely : Label::Timely;
    const auto after = tally(truth, said);
    EXPECT_NEAR(std::abs(after.hit_ratio - before.hit_ratio), 1.0 / static_cast<double>(n), 1e-12);
    const auto& a = before.confusion;
    const auto& b = after.confusion;
    if (truth[i] == Label::Timely) {
      EXPECT_EQ(a.tp + a.fn, b.tp + b.fn);
      EXPECT_EQ(std::max(a.tp, b.tp) - std::min(a.tp, b.tp), 1u);
      EXPECT_EQ(a.fp, b.fp);
      EXPECT_EQ(a.tn, b.tn);
    } else {
      EXPECT_EQ(a.fp + a.tn, b.fp + b.tn);
      EXPECT_EQ(std::max(a.fp, b.fp) - std::min(a.fp, b.fp), 1u);
      EXPECT_EQ(a.tp, b.tp);
      EXPECT_EQ(a.fn, b.fn);
    }
  }
}

TEST(Tally, Errors) {
  const std::vector<Label> one = {Label::Timely};
  EXPECT_THROW(tally({}, {}), Error);
  EXPECT_THROW(tally(one, {}), Error);
}

TEST(Evaluate, ModelPredictions) {
  std::mt19937_64 g(3);
  const FeatureSetSpec spec{FeatureSet::Set1, 2};
  const auto tm = sign_model(spec);
  const auto clean = sign_dataset(g, 60, spec, 0.0);
  const auto r = evaluate(tm, clean, 0.5, "m", "d");
  EXPECT_EQ(r.hit_ratio, 1.0);
  EXPECT_EQ(r.training_accuracy, 0.875);
  EXPECT_EQ(r.model_id, "m");
  EXPECT_EQ(r.dataset_id, "d");

  const auto noisy = sign_dataset(g, 80, spec, 0.3);
  const auto rn = evaluate(tm, noisy);
  std::size_t agree = 0;
  for (const auto& e : noisy.examples) agree += (e.features[0] > 0) == (e.label == Label::Timely);
  EXPECT_EQ(rn.hit_ratio, static_cast<double>(agree) / 80.0);
}

TEST(Evaluate, PermutationInvariant) {
  std::mt19937_64 g(4);
  const FeatureSetSpec spec{FeatureSet::Set2, 1};
  const auto tm = sign_model(spec);
  auto ds = sign_dataset(g, 50, spec, 0.25);
  const auto base = evaluate(tm, ds);
  for (int rep = 0; rep < 10; ++rep) {
    std::shuffle(ds.examples.begin(), ds.examples.end(), g);
    EXPECT_EQ(evaluate(tm, ds), base);
  }
}

TEST(Evaluate, PrenormalizedDatasetSkipsNormalizer) {
  std::mt19937_64 g(5);
  const FeatureSetSpec spec{FeatureSet::Set1, 1};
  auto tm = sign_model(spec);
  tm.normalizer.mean[0] = 10.0;  // would flip every raw prediction
  auto ds = sign_dataset(g, 30, spec, 0.0);
  ds.normalized = true;
  EXPECT_EQ(evaluate(tm, ds).hit_ratio, 1.0);
}

TEST(Evaluate, Errors) {
  std::mt19937_64 g(6);
  const auto tm = sign_model({FeatureSet::Set1, 2});
  auto other = sign_dataset(g, 10, {FeatureSet::Set2, 2}, 0.0);
  EXPECT_THROW(evaluate(tm, other), Error);
  try {
    evaluate(tm, other);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SpecMismatch);
  }
  Dataset empty;
  empty.spec = tm.spec;
  try {
    evaluate(tm, empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyDataset);
  }
}

TEST(Report, JsonRoundTrip) {
  std::mt19937_64 g(7);
  for (int rep = 0; rep < 50; ++rep) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 100)(g);
    auto r = tally(random_labels(g, n), random_labels(g, n));
    if (g() % 2) r.training_accuracy = oracle::draw(g, 0, 1);
    r.model_id = oracle::random_id(g);
    r.dataset_id = oracle::random_id(g);
    EXPECT_EQ(report_from_json(report_to_json(r)), r);
    EXPECT_EQ(report_from_json(nlohmann::json::parse(render_report(r, ReportFormat::Json))), r);
  }
}

TEST(Report, TextListsEveryField) {
  std::vector<Label> truth(4, Label::Timely);
  auto r = tally(truth, truth);
  r.training_accuracy = 1.0;
  r.model_id = "model.json";
  const auto text = render_report(r, ReportFormat::Text);
  for (const char* key : {"hit_ratio: 1", "training_accuracy: 1", "n_test: 4", "model_id: model.json", "dataset_id:",
                          "tp=4 fp=0 tn=0 fn=0"})
    EXPECT_NE(text.find(key), std::string::npos) << key;
}

TEST(Report, RejectsInconsistentJson) {
  std::vector<Label> truth(4, Label::Timely);
  auto j = report_to_json(tally(truth, truth));
  j["n_test"] = 5;
  EXPECT_THROW(report_from_json(j), Error);
  j.erase("confusion");
  EXPECT_THROW(report_from_json(j), Error);
}
