#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "satpredict/error.hpp"
#include "satpredict/features.hpp"
#include "satpredict/rng.hpp"
#include "satpredict/text.hpp"
#include "satpredict/trace.hpp"

namespace satpredict {

/// 1 = terminated within the time limit, 0 = did not.
enum class Label : std::uint8_t { NotTimely = 0, Timely = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }

struct LabeledExample {
  FeatureVector features;
  Label label = Label::NotTimely;
  std::string run_id;

  bool operator==(const LabeledExample&) const = default;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  FeatureSetSpec spec;
  bool normalized = false;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::size_t count(Label l) const {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [l](const auto& e) { return e.label == l; }));
  }
  bool operator==(const Dataset&) const = default;
};

inline Label label_run(const RunTrace& trace, double time_limit) {
  switch (trace.outcome.kind) {
    case Outcome::Kind::Terminated:
      return trace.outcome.seconds <= time_limit ? Label::Timely : Label::NotTimely;
    case Outcome::Kind::TimedOut:
      return Label::NotTimely;
    case Outcome::Kind::StillRunning:
      break;
  }
  throw Error(Errc::RunStillInProgress, "run '" + trace.run_id + "' has no final outcome");
}

/// Down-samples to equal class counts and shuffles, both driven by `seed`.
/// With `pool_size`, exactly that many examples are kept: ceil(pool/2) of
/// class 1 and floor(pool/2) of class 0.
inline Dataset build_balanced(std::span<const RunTrace> traces, std::span<const Label> labels,
                              const FeatureSetSpec& spec, std::uint64_t seed,
                              std::optional<std::size_t> pool_size = std::nullopt) {
  if (traces.size() != labels.size()) throw Error(Errc::LengthMismatch, "traces and labels differ in count");
  std::vector<LabeledExample> by_class[2];
  for (std::size_t i = 0; i < traces.size(); ++i)
    by_class[to_int(labels[i])].push_back({extract_features(traces[i], spec), labels[i], traces[i].run_id});
  if (by_class[0].empty() || by_class[1].empty()) throw Error(Errc::OneClassOnly, "need examples of both classes");

  std::size_t take[2];
  if (pool_size) {
    take[1] = (*pool_size + 1) / 2;
    take[0] = *pool_size / 2;
    if (take[0] == 0 || take[0] > by_class[0].size() || take[1] > by_class[1].size())
      throw Error(Errc::BadConfig, "pool size " + std::to_string(*pool_size) + " not available from " +
                                       std::to_string(by_class[1].size()) + "/" + std::to_string(by_class[0].size()));
  } else {
    take[0] = take[1] = std::min(by_class[0].size(), by_class[1].size());
  }

  Rng rng(seed);
  Dataset ds{{}, spec, false};
  for (int c : {1, 0}) {
    auto& pool = by_class[c];
    rng.shuffle(std::span(pool));
    ds.examples.insert(ds.examples.end(), std::make_move_iterator(pool.begin()),
                       std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(take[c])));
  }
  rng.shuffle(std::span(ds.examples));
  return ds;
}

/// Stratified split; each class contributes round-half-up(test_fraction * n_c)
/// examples to the test side. Both sides keep the input order.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error(Errc::BadConfig, "test_fraction must be in (0, 1)");
  std::vector<bool> in_test(ds.size(), false);
  Rng rng(seed);
  for (Label c : {Label::NotTimely, Label::Timely}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.examples[i].label == c) idx.push_back(i);
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(idx.size()) + 0.5));
    if (n_test == 0 || n_test >= idx.size())
      throw Error(Errc::DegenerateSplit, "class " + std::to_string(to_int(c)) + " with " + std::to_string(idx.size()) +
                                             " examples would leave one side empty");
    rng.shuffle(std::span(idx));
    for (std::size_t k = 0; k < n_test; ++k) in_test[idx[k]] = true;
  }
  Dataset train{{}, ds.spec, ds.normalized};
  Dataset test{{}, ds.spec, ds.normalized};
  for (std::size_t i = 0; i < ds.size(); ++i) (in_test[i] ? test : train).examples.push_back(ds.examples[i]);
  return {std::move(train), std::move(test)};
}

inline std::string serialize_dataset(const Dataset& ds) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "refusing to write an empty dataset");
  const std::size_t dim = ds.spec.dimension();
  std::string out = "# spec=" + std::string(feature_set_name(ds.spec.set)) + ";K=" +
                    std::to_string(ds.spec.iterations) + ";normalized=" + (ds.normalized ? "1" : "0") + "\n";
  out += "run_id,label";
  for (std::size_t i = 0; i < dim; ++i) out += ",f" + std::to_string(i);
  out += '\n';
  for (const auto& e : ds.examples) {
    if (e.features.size() != dim) throw Error(Errc::LengthMismatch, "example '" + e.run_id + "' has wrong arity");
    out += text::csv_escape(e.run_id) + "," + std::to_string(to_int(e.label));
    for (double v : e.features.values) out += "," + text::format_double(v);
    out += '\n';
  }
  return out;
}

inline Dataset parse_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::HeaderMismatch, "missing metadata line", 1);
  text::strip_cr(line);
  Dataset ds;
  {
    // # spec=set1;K=2;normalized=0
    if (!text::starts_with(line, "# ")) throw Error(Errc::HeaderMismatch, "missing metadata line", 1);
    std::istringstream meta(line.substr(2));
    std::string kv;
    bool got_spec = false, got_k = false, got_norm = false;
    while (std::getline(meta, kv, ';')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(Errc::HeaderMismatch, "bad metadata '" + kv + "'", 1);
      const auto key = kv.substr(0, eq);
      const auto val = kv.substr(eq + 1);
      if (key == "spec") {
        if (val != "set1" && val != "set2") throw Error(Errc::HeaderMismatch, "bad spec '" + val + "'", 1);
        ds.spec.set = feature_set_from_name(val);
        got_spec = true;
      } else if (key == "K") {
        const auto k = text::parse_int(val);
        if (!k || *k < 1) throw Error(Errc::HeaderMismatch, "bad K", 1);
        ds.spec.iterations = static_cast<std::size_t>(*k);
        got_k = true;
      } else if (key == "normalized") {
        if (val != "0" && val != "1") throw Error(Errc::HeaderMismatch, "bad normalized flag", 1);
        ds.normalized = val == "1";
        got_norm = true;
      } else {
        throw Error(Errc::HeaderMismatch, "unknown metadata key '" + key + "'", 1);
      }
    }
    if (!got_spec || !got_k || !got_norm) throw Error(Errc::HeaderMismatch, "incomplete metadata", 1);
  }
  const std::size_t dim = ds.spec.dimension();
  if (!std::getline(in, line)) throw Error(Errc::HeaderMismatch, "missing header row", 2);
  text::strip_cr(line);
  {
    std::string expected = "run_id,label";
    for (std::size_t i = 0; i < dim; ++i) expected += ",f" + std::to_string(i);
    if (line != expected) throw Error(Errc::HeaderMismatch, "header row does not match spec arity " + std::to_string(dim), 2);
  }
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (text::trim(line).empty()) continue;
    auto fields = text::split_csv(line);
    if (!fields || fields->size() != dim + 2)
      throw Error(Errc::RowArity, "line " + std::to_string(line_no) + ": expected " + std::to_string(dim + 2) + " fields",
                  line_no);
    LabeledExample e;
    e.run_id = (*fields)[0];
    if ((*fields)[1] == "1") {
      e.label = Label::Timely;
    } else if ((*fields)[1] == "0") {
      e.label = Label::NotTimely;
    } else {
      throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": label must be 0 or 1", line_no);
    }
    e.features.values.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const auto v = text::parse_double((*fields)[2 + i]);
      if (!v) throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": bad number", line_no);
      e.features.values.push_back(*v);
    }
    ds.examples.push_back(std::move(e));
  }
  if (ds.empty()) throw Error(Errc::EmptyDataset, "dataset file has no rows");
  return ds;
}

inline Dataset parse_dataset(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  return parse_dataset(in);
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  const auto body = serialize_dataset(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw Error(Errc::Io, "write to '" + path + "' failed");
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  return parse_dataset(in);
}

}  // namespace satpredict
