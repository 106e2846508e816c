#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "satpredict/error.hpp"
#include "satpredict/trace.hpp"

namespace satpredict {

enum class FeatureSet : std::uint8_t { Set1, Set2 };

inline constexpr std::array<Stat, 6> kSet1Params = {
    Stat::AllThreads, Stat::ConflictsPerSecond, Stat::BlockedRestarts,
    Stat::Restarts,   Stat::PropsPerDecision,   Stat::PropsPerConflict,
};

inline constexpr std::array<Stat, 7> kSet2Params = {
    Stat::AllThreads,       Stat::ConflictsPerSecond,  Stat::BlockedRestarts,      Stat::Restarts,
    Stat::PropsPerDecision, Stat::LiteralsPerConflict, Stat::DecisionsPerConflict,
};

inline std::string_view feature_set_name(FeatureSet s) { return s == FeatureSet::Set1 ? "set1" : "set2"; }

inline FeatureSet feature_set_from_name(std::string_view name) {
  if (name == "set1") return FeatureSet::Set1;
  if (name == "set2") return FeatureSet::Set2;
  throw Error(Errc::BadConfig, "unknown feature set '" + std::string(name) + "'");
}

/// Which runtime parameters, over how many leading iterations, form the
/// model input.
struct FeatureSetSpec {
  FeatureSet set = FeatureSet::Set1;
  std::size_t iterations = 2;

  std::span<const Stat> params() const {
    if (set == FeatureSet::Set1) return kSet1Params;
    return kSet2Params;
  }
  std::size_t dimension() const { return params().size() * iterations; }

  bool operator==(const FeatureSetSpec&) const = default;
};

/// Iteration-major layout: iteration 1's parameters, then iteration 2's, ...
struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const FeatureVector&) const = default;
};

inline FeatureVector extract_features(const RunTrace& trace, const FeatureSetSpec& spec) {
  if (spec.iterations < 1) throw Error(Errc::BadConfig, "K must be >= 1");
  if (trace.records.size() < spec.iterations)
    throw Error(Errc::InsufficientIterations, "have " + std::to_string(trace.records.size()) + ", need " +
                                                  std::to_string(spec.iterations));
  FeatureVector v;
  v.values.reserve(spec.dimension());
  for (std::size_t i = 0; i < spec.iterations; ++i)
    for (Stat s : spec.params()) v.values.push_back(trace.records[i].get(s));
  return v;
}

struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Normalizer identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }
  std::size_t dimension() const { return mean.size(); }
  bool operator==(const Normalizer&) const = default;
};

/// Sample mean, population standard deviation. Dimensions with (numerically)
/// zero variance get stddev 1.
inline Normalizer fit_normalizer(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) throw Error(Errc::EmptyInput, "cannot fit a normalizer on no vectors");
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim) throw Error(Errc::LengthMismatch, "feature vectors differ in length");

  const auto n = static_cast<double>(vectors.size());
  Normalizer out{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  for (std::size_t d = 0; d < dim; ++d) {
    double sum = 0.0;
    for (const auto& v : vectors) sum += v[d];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& v : vectors) ss += (v[d] - mean) * (v[d] - mean);
    const double sd = std::sqrt(ss / n);
    out.mean[d] = mean;
    out.stddev[d] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  }
  return out;
}

inline FeatureVector apply_normalizer(const Normalizer& n, const FeatureVector& v) {
  if (v.size() != n.dimension())
    throw Error(Errc::LengthMismatch, "vector has " + std::to_string(v.size()) + " dims, normalizer " +
                                          std::to_string(n.dimension()));
  FeatureVector out;
  out.values.resize(v.size());
  for (std::size_t d = 0; d < v.size(); ++d) out.values[d] = (v[d] - n.mean[d]) / n.stddev[d];
  return out;
}

}  // namespace satpredict
