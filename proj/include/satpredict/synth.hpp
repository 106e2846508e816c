#pragma once

// Synthetic solver traces with known class-conditional distributions and a
// Monte-Carlo estimate of the Bayes-optimal accuracy on them.
//
// Rates, times and ratios are log-normal (center = median, spread = sd of
// the log); restart counts are normals rounded to the nearest non-negative
// integer (center = mean, spread = sd). Every spread is multiplied by
// noise_scale, so noise_scale 0 reproduces the centers exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "satpredict/dataset.hpp"
#include "satpredict/error.hpp"
#include "satpredict/rng.hpp"
#include "satpredict/trace.hpp"

namespace satpredict {

enum class StatFamily : std::uint8_t { LogNormal, RoundedNormal };

inline StatFamily stat_family(Stat s) {
  return s == Stat::Restarts || s == Stat::BlockedRestarts ? StatFamily::RoundedNormal : StatFamily::LogNormal;
}

struct StatDist {
  double center = 1.0;
  double spread = 0.0;
  bool operator==(const StatDist&) const = default;
};

struct IterationDist {
  std::array<StatDist, kStatCount> stats{};
  const StatDist& operator[](Stat s) const { return stats[static_cast<std::size_t>(s)]; }
  StatDist& operator[](Stat s) { return stats[static_cast<std::size_t>(s)]; }
  bool operator==(const IterationDist&) const = default;
};

struct ClassParams {
  std::vector<IterationDist> iterations;
  bool operator==(const ClassParams&) const = default;
};

struct GeneratorParams {
  ClassParams timely;
  ClassParams not_timely;
  double noise_scale = 1.0;
  double time_limit = 86400.0;

  const ClassParams& of(Label l) const { return l == Label::Timely ? timely : not_timely; }
  bool operator==(const GeneratorParams&) const = default;

  static GeneratorParams defaults();
};

namespace detail {

// all-threads, conflicts/second, blocked-restarts, restarts, props/decision,
// props/conflict, literals/conflict, decisions/conflict
inline IterationDist make_iteration(std::array<double, kStatCount> centers, std::array<double, kStatCount> spreads) {
  IterationDist d;
  for (std::size_t i = 0; i < kStatCount; ++i) d.stats[i] = {centers[i], spreads[i]};
  return d;
}

}  // namespace detail

/// Timely runs start fast with a high, rising conflict rate; the others start
/// late with a flat, low one. literals/conflict and decisions/conflict share
/// one distribution across classes.
inline GeneratorParams GeneratorParams::defaults() {
  using detail::make_iteration;
  GeneratorParams p;
  const std::array<double, kStatCount> s1 = {0.35, 0.30, 4, 8, 0.25, 0.30, 0.30, 0.25};
  const std::array<double, kStatCount> s2 = {0.35, 0.35, 6, 15, 0.25, 0.30, 0.30, 0.25};
  const std::array<double, kStatCount> s3 = {0.35, 0.35, 8, 20, 0.25, 0.30, 0.30, 0.25};
  p.timely.iterations = {
      make_iteration({600, 4000, 12, 40, 180, 250, 60, 1.8}, s1),
      make_iteration({1500, 5200, 28, 95, 185, 240, 62, 1.9}, s2),
      make_iteration({3000, 4300, 45, 160, 190, 235, 63, 2.0}, s3),
  };
  p.not_timely.iterations = {
      make_iteration({900, 2800, 10, 32, 160, 300, 60, 1.8}, s1),
      make_iteration({2400, 2700, 24, 80, 162, 305, 62, 1.9}, s2),
      make_iteration({5200, 2650, 38, 130, 163, 308, 63, 2.0}, s3),
  };
  return p;
}

inline void validate(const GeneratorParams& p) {
  if (!(p.noise_scale >= 0.0) || !std::isfinite(p.noise_scale)) throw Error(Errc::BadParams, "noise_scale must be >= 0");
  if (!(p.time_limit > 0.0) || !std::isfinite(p.time_limit)) throw Error(Errc::BadParams, "time_limit must be > 0");
  for (const ClassParams* c : {&p.timely, &p.not_timely}) {
    if (c->iterations.size() < 2) throw Error(Errc::BadParams, "each class needs at least 2 iterations");
    for (const auto& it : c->iterations) {
      for (Stat s : kAllStats) {
        const auto& d = it[s];
        if (!std::isfinite(d.center) || !std::isfinite(d.spread) || d.spread < 0.0)
          throw Error(Errc::BadParams, std::string(stat_name(s)) + ": bad distribution");
        const bool ok = stat_family(s) == StatFamily::LogNormal ? d.center > 0.0 : d.center >= 0.0;
        if (!ok) throw Error(Errc::BadParams, std::string(stat_name(s)) + ": bad center");
      }
    }
  }
  if (p.timely.iterations.size() != p.not_timely.iterations.size())
    throw Error(Errc::BadParams, "classes must have the same number of iterations");
}

inline double sample_stat(Stat s, const StatDist& d, double noise, Rng& rng) {
  const double sigma = d.spread * noise;
  if (stat_family(s) == StatFamily::LogNormal) {
    if (sigma == 0.0) return d.center;
    return d.center * std::exp(sigma * rng.normal());
  }
  const double draw = sigma == 0.0 ? d.center : d.center + sigma * rng.normal();
  return std::max(0.0, std::round(draw));
}

namespace detail {

// P(Z > x) for standard normal Z.
inline double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

}  // namespace detail

/// Log density (log probability mass for counts) of `x` under `d`.
inline double log_density(Stat s, const StatDist& d, double noise, double x) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const double sigma = d.spread * noise;
  if (stat_family(s) == StatFamily::LogNormal) {
    if (sigma == 0.0) return x == d.center ? 0.0 : kNegInf;
    if (!(x > 0.0)) return kNegInf;
    const double z = (std::log(x) - std::log(d.center)) / sigma;
    return -std::log(x) - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
  }
  if (sigma == 0.0) return x == std::max(0.0, std::round(d.center)) ? 0.0 : kNegInf;
  if (x < 0.0 || x != std::round(x)) return kNegInf;
  const double hi = (x + 0.5 - d.center) / sigma;
  if (x == 0.0) return std::log1p(-detail::upper_tail(hi));
  const double lo = (x - 0.5 - d.center) / sigma;
  // Subtract in whichever tail keeps precision.
  const double mass = lo > 0.0 ? detail::upper_tail(lo) - detail::upper_tail(hi)
                               : detail::upper_tail(-hi) - detail::upper_tail(-lo);
  return mass > 0.0 ? std::log(mass) : kNegInf;
}

namespace detail {

inline IterationRecord sample_record(const IterationDist& dist, std::int64_t index, double noise, Rng& rng) {
  IterationRecord r;
  r.iteration_index = index;
  for (Stat s : kAllStats) r.set(s, sample_stat(s, dist[s], noise, rng));
  return r;
}

}  // namespace detail

inline RunTrace generate_trace(Label label, const GeneratorParams& params, std::uint64_t seed,
                               std::string run_id = {}) {
  validate(params);
  Rng rng(seed);
  RunTrace t;
  t.run_id = run_id.empty() ? "synth-" + std::to_string(to_int(label)) + "-" + std::to_string(seed) : std::move(run_id);
  t.instance_id = "synthetic";
  const auto& cls = params.of(label);
  for (std::size_t i = 0; i < cls.iterations.size(); ++i) {
    auto r = detail::sample_record(cls.iterations[i], static_cast<std::int64_t>(i + 1), params.noise_scale, rng);
    t.records.push_back(r);
  }
  if (label == Label::Timely) {
    t.outcome = Outcome::terminated(params.time_limit * (0.05 + 0.9 * rng.uniform()));
  } else {
    t.outcome = Outcome::timed_out(params.time_limit);
  }
  return t;
}

struct Corpus {
  std::vector<RunTrace> traces;
  std::vector<Label> labels;
};

/// Alternates class 1 and class 0; run ids are "run-00001", ...
inline Corpus generate_corpus(std::size_t n_per_class, const GeneratorParams& params, std::uint64_t seed) {
  if (n_per_class < 1) throw Error(Errc::BadParams, "n_per_class must be >= 1");
  validate(params);
  Rng seeds(seed);
  Corpus c;
  char id[32];
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const Label label = i % 2 == 0 ? Label::Timely : Label::NotTimely;
    std::snprintf(id, sizeof(id), "run-%05zu", i + 1);
    c.traces.push_back(generate_trace(label, params, seeds.next_u64(), id));
    c.labels.push_back(label);
  }
  return c;
}

struct BayesEstimate {
  double accuracy = 0.0;
  double std_error = 0.0;
};

/// Accuracy of the likelihood-ratio rule that knows both class-conditional
/// densities, over the first `iterations` iterations and all eight stats,
/// with equal priors. Ties go to class 1.
inline BayesEstimate bayes_accuracy(const GeneratorParams& params, std::size_t n_mc, std::uint64_t seed,
                                    std::size_t iterations = 2) {
  validate(params);
  if (n_mc < 1000) throw Error(Errc::BadParams, "n_mc must be >= 1000");
  if (iterations < 1 || iterations > params.timely.iterations.size())
    throw Error(Errc::BadParams, "iterations outside the generated range");
  Rng rng(seed);
  std::size_t correct = 0;
  for (std::size_t n = 0; n < n_mc; ++n) {
    const Label truth = rng.bernoulli(0.5) ? Label::Timely : Label::NotTimely;
    double ll_timely = 0.0, ll_not = 0.0;
    for (std::size_t i = 0; i < iterations; ++i) {
      const auto r = detail::sample_record(params.of(truth).iterations[i], 1, params.noise_scale, rng);
      for (Stat s : kAllStats) {
        ll_timely += log_density(s, params.timely.iterations[i][s], params.noise_scale, r.get(s));
        ll_not += log_density(s, params.not_timely.iterations[i][s], params.noise_scale, r.get(s));
      }
    }
    const Label said = ll_timely >= ll_not ? Label::Timely : Label::NotTimely;
    correct += said == truth;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(n_mc);
  return {acc, std::sqrt(acc * (1.0 - acc) / static_cast<double>(n_mc))};
}

// ---------------------------------------------------------------------------
// JSON config

inline nlohmann::json params_to_json(const GeneratorParams& p) {
  using nlohmann::json;
  const auto cls = [](const ClassParams& c) {
    json its = json::array();
    for (const auto& it : c.iterations) {
      json o = json::object();
      for (Stat s : kAllStats) o[std::string(stat_name(s))] = {{"center", it[s].center}, {"spread", it[s].spread}};
      its.push_back(std::move(o));
    }
    return its;
  };
  return {{"noise_scale", p.noise_scale},
          {"time_limit", p.time_limit},
          {"timely", cls(p.timely)},
          {"not_timely", cls(p.not_timely)}};
}

/// Missing top-level keys fall back to the defaults.
inline GeneratorParams params_from_json(const nlohmann::json& j) {
  try {
    auto p = GeneratorParams::defaults();
    p.noise_scale = j.value("noise_scale", p.noise_scale);
    p.time_limit = j.value("time_limit", p.time_limit);
    const auto cls = [](const nlohmann::json& arr) {
      ClassParams c;
      for (const auto& o : arr) {
        IterationDist it;
        for (Stat s : kAllStats) {
          const auto& d = o.at(std::string(stat_name(s)));
          it[s] = {d.at("center").get<double>(), d.at("spread").get<double>()};
        }
        c.iterations.push_back(it);
      }
      return c;
    };
    if (j.contains("timely")) p.timely = cls(j.at("timely"));
    if (j.contains("not_timely")) p.not_timely = cls(j.at("not_timely"));
    validate(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadParams, e.what());
  }
}

}  // namespace satpredict
