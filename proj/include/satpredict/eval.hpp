#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "satpredict/dataset.hpp"
#include "satpredict/error.hpp"
#include "satpredict/nn.hpp"
#include "satpredict/text.hpp"

namespace satpredict {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

/// Test-set hit ratio next to the model's own training accuracy.
struct EvalReport {
  double hit_ratio = 0.0;
  Confusion confusion;
  std::size_t n_test = 0;
  std::optional<double> training_accuracy;
  std::string model_id;
  std::string dataset_id;

  bool operator==(const EvalReport&) const = default;
};

inline EvalReport tally(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) throw Error(Errc::LengthMismatch, "truth and predictions differ in count");
  if (truth.empty()) throw Error(Errc::EmptyDataset, "nothing to evaluate");
  EvalReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool actual = truth[i] == Label::Timely;
    const bool said = predicted[i] == Label::Timely;
    if (actual && said) ++r.confusion.tp;
    else if (!actual && said) ++r.confusion.fp;
    else if (!actual) ++r.confusion.tn;
    else ++r.confusion.fn;
  }
  r.n_test = truth.size();
  r.hit_ratio = static_cast<double>(r.confusion.tp + r.confusion.tn) / static_cast<double>(r.n_test);
  return r;
}

/// Evaluates in infer mode. Raw test features are normalized with the model's
/// stored normalizer; a dataset flagged as normalized is used as is.
inline EvalReport evaluate(const TrainedModel& tm, const Dataset& test, double threshold = 0.5,
                           std::string model_id = {}, std::string dataset_id = {}) {
  if (test.empty()) throw Error(Errc::EmptyDataset, "test dataset is empty");
  if (!(test.spec == tm.spec)) throw Error(Errc::SpecMismatch, "test dataset spec differs from the model's");
  check_consistency(tm);
  std::vector<Label> truth, predicted;
  truth.reserve(test.size());
  predicted.reserve(test.size());
  for (const auto& e : test.examples) {
    truth.push_back(e.label);
    if (test.normalized) {
      if (e.features.size() != tm.model.arch.input_dim) throw Error(Errc::DimensionMismatch, "bad example arity");
      predicted.push_back(decide(forward(tm.model, e.features.values), threshold));
    } else {
      predicted.push_back(predict_features(tm, e.features, threshold).label);
    }
  }
  auto r = tally(truth, predicted);
  if (!tm.history.empty()) r.training_accuracy = tm.history.back().train_acc;
  r.model_id = std::move(model_id);
  r.dataset_id = std::move(dataset_id);
  return r;
}

enum class ReportFormat : std::uint8_t { Text, Json };

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j = {
      {"hit_ratio", r.hit_ratio},
      {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
      {"n_test", r.n_test},
      {"training_accuracy", nullptr},
      {"model_id", r.model_id},
      {"dataset_id", r.dataset_id},
  };
  if (r.training_accuracy) j["training_accuracy"] = *r.training_accuracy;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.hit_ratio = j.at("hit_ratio").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                   c.at("fn").get<std::size_t>()};
    r.n_test = j.at("n_test").get<std::size_t>();
    if (!j.at("training_accuracy").is_null()) r.training_accuracy = j.at("training_accuracy").get<double>();
    r.model_id = j.at("model_id").get<std::string>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    if (r.confusion.total() != r.n_test) throw Error(Errc::MalformedLine, "confusion counts do not sum to n_test");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedLine, std::string("bad report: ") + e.what());
  }
}

inline std::string render_report(const EvalReport& r, ReportFormat format) {
  if (format == ReportFormat::Json) return report_to_json(r).dump() + "\n";
  std::string out;
  out += "model_id: " + r.model_id + "\n";
  out += "dataset_id: " + r.dataset_id + "\n";
  out += "n_test: " + std::to_string(r.n_test) + "\n";
  out += "hit_ratio: " + text::format_double(r.hit_ratio) + "\n";
  out += "training_accuracy: " + (r.training_accuracy ? text::format_double(*r.training_accuracy) : "n/a") + "\n";
  out += "confusion: tp=" + std::to_string(r.confusion.tp) + " fp=" + std::to_string(r.confusion.fp) +
         " tn=" + std::to_string(r.confusion.tn) + " fn=" + std::to_string(r.confusion.fn) + "\n";
  return out;
}

}  // namespace satpredict
