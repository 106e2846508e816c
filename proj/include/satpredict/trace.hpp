#pragma once

// Solver statistics ingestion: the canonical per-iteration stats grammar,
// pluggable adapters for solver-specific log dialects, and the canonical
// CSV persistence of run traces.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "satpredict/error.hpp"
#include "satpredict/text.hpp"

namespace satpredict {

enum class Stat : std::uint8_t {
  AllThreads,
  ConflictsPerSecond,
  BlockedRestarts,
  Restarts,
  PropsPerDecision,
  PropsPerConflict,
  LiteralsPerConflict,
  DecisionsPerConflict,
};

inline constexpr std::size_t kStatCount = 8;

inline constexpr std::array<Stat, kStatCount> kAllStats = {
    Stat::AllThreads,          Stat::ConflictsPerSecond, Stat::BlockedRestarts,
    Stat::Restarts,            Stat::PropsPerDecision,   Stat::PropsPerConflict,
    Stat::LiteralsPerConflict, Stat::DecisionsPerConflict,
};

/// Name used in the solver stats stream ("conflicts/second").
inline std::string_view stat_name(Stat s) {
  static constexpr std::array<std::string_view, kStatCount> names = {
      "all-threads",    "conflicts/second", "blocked-restarts",  "restarts",
      "props/decision", "props/conflict",   "literals/conflict", "decisions/conflict",
  };
  return names[static_cast<std::size_t>(s)];
}

/// Column name used in the canonical CSV ("conflicts_per_sec").
inline std::string_view stat_column(Stat s) {
  static constexpr std::array<std::string_view, kStatCount> names = {
      "all_threads",        "conflicts_per_sec",  "blocked_restarts",      "restarts",
      "props_per_decision", "props_per_conflict", "literals_per_conflict", "decisions_per_conflict",
  };
  return names[static_cast<std::size_t>(s)];
}

inline std::optional<Stat> stat_from_name(std::string_view name) {
  for (Stat s : kAllStats)
    if (stat_name(s) == name) return s;
  return std::nullopt;
}

/// One solver iteration's statistics, stored as reported.
struct IterationRecord {
  std::int64_t iteration_index = 0;
  double all_threads_time = 0.0;
  double conflicts_per_second = 0.0;
  double blocked_restarts = 0.0;
  double restarts = 0.0;
  double props_per_decision = 0.0;
  double props_per_conflict = 0.0;
  double literals_per_conflict = 0.0;
  double decisions_per_conflict = 0.0;

  double get(Stat s) const { return this->*member(s); }
  void set(Stat s, double v) { this->*member(s) = v; }

  bool operator==(const IterationRecord&) const = default;

 private:
  static double IterationRecord::*member(Stat s) {
    static constexpr std::array<double IterationRecord::*, kStatCount> table = {
        &IterationRecord::all_threads_time,      &IterationRecord::conflicts_per_second,
        &IterationRecord::blocked_restarts,      &IterationRecord::restarts,
        &IterationRecord::props_per_decision,    &IterationRecord::props_per_conflict,
        &IterationRecord::literals_per_conflict, &IterationRecord::decisions_per_conflict,
    };
    return table[static_cast<std::size_t>(s)];
  }
};

/// Returns a description of the first violated invariant, if any.
inline std::optional<std::string> record_violation(const IterationRecord& r) {
  if (r.iteration_index < 1) return "iteration_index must be >= 1";
  for (Stat s : kAllStats) {
    const double v = r.get(s);
    if (!std::isfinite(v)) return std::string(stat_name(s)) + " is not finite";
    if (s == Stat::AllThreads ? !(v > 0.0) : v < 0.0)
      return std::string(stat_name(s)) + (s == Stat::AllThreads ? " must be > 0" : " must be >= 0");
  }
  return std::nullopt;
}

struct Outcome {
  enum class Kind : std::uint8_t { StillRunning, Terminated, TimedOut };

  Kind kind = Kind::StillRunning;
  double seconds = 0.0;  // total runtime (Terminated) or limit (TimedOut)

  static Outcome still_running() { return {}; }
  static Outcome terminated(double total_runtime) { return {Kind::Terminated, total_runtime}; }
  static Outcome timed_out(double limit) { return {Kind::TimedOut, limit}; }

  bool operator==(const Outcome&) const = default;
};

inline std::string_view outcome_name(Outcome::Kind k) {
  switch (k) {
    case Outcome::Kind::Terminated: return "terminated";
    case Outcome::Kind::TimedOut: return "timed_out";
    case Outcome::Kind::StillRunning: break;
  }
  return "still_running";
}

struct RunTrace {
  std::string run_id;
  std::string instance_id;
  std::vector<IterationRecord> records;
  Outcome outcome;

  bool operator==(const RunTrace&) const = default;
};

// ---------------------------------------------------------------------------
// Adapters

/// Translates one native solver log line into zero or more canonical lines.
class StatsAdapter {
 public:
  virtual ~StatsAdapter() = default;
  virtual std::string_view name() const = 0;
  virtual void translate(std::string_view line, std::vector<std::string>& out) const = 0;
};

class CanonicalAdapter final : public StatsAdapter {
 public:
  std::string_view name() const override { return "canonical"; }
  void translate(std::string_view line, std::vector<std::string>& out) const override {
    out.emplace_back(line);
  }
};

class AdapterRegistry {
 public:
  static AdapterRegistry& instance() {
    static AdapterRegistry registry;
    return registry;
  }

  void add(std::shared_ptr<const StatsAdapter> adapter) {
    std::lock_guard lock(mu_);
    adapters_[std::string(adapter->name())] = std::move(adapter);
  }

  std::shared_ptr<const StatsAdapter> find(std::string_view name) const {
    std::lock_guard lock(mu_);
    auto it = adapters_.find(std::string(name));
    if (it == adapters_.end()) throw Error(Errc::UnknownAdapter, "no adapter named '" + std::string(name) + "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : adapters_) out.push_back(k);
    return out;
  }

 private:
  AdapterRegistry() { adapters_["canonical"] = std::make_shared<CanonicalAdapter>(); }

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const StatsAdapter>> adapters_;
};

// ---------------------------------------------------------------------------
// Canonical stats stream

/// Incremental parser for the canonical stats grammar. Holds one open
/// iteration block plus the closed records; a block left open at the end of
/// input is discarded.
class StatsStreamParser {
 public:
  explicit StatsStreamParser(std::shared_ptr<const StatsAdapter> adapter =
                                 AdapterRegistry::instance().find("canonical"),
                             std::string run_id = {}, std::string instance_id = {})
      : adapter_(std::move(adapter)) {
    trace_.run_id = std::move(run_id);
    trace_.instance_id = std::move(instance_id);
  }

  /// Consumes one native line. Returns true when it closed an iteration block.
  bool feed(std::string_view line) {
    ++line_no_;
    scratch_.clear();
    adapter_->translate(line, scratch_);
    bool closed = false;
    for (const auto& canonical : scratch_) closed |= feed_canonical(canonical);
    return closed;
  }

  std::size_t closed_iterations() const { return trace_.records.size(); }
  bool solver_answered() const { return answered_; }
  const RunTrace& trace() const { return trace_; }
  RunTrace take() && { return std::move(trace_); }

 private:
  [[noreturn]] void malformed(const std::string& why) const {
    throw Error(Errc::MalformedLine, "line " + std::to_string(line_no_) + ": " + why, line_no_);
  }

  // Parses the integer inside "<k>]" at the tail of a tag line.
  std::int64_t bracketed_index(std::string_view rest) const {
    rest = text::trim(rest);
    if (rest.empty() || rest.back() != ']') malformed("expected ']'");
    auto k = text::parse_int(rest.substr(0, rest.size() - 1));
    if (!k) malformed("bad iteration number");
    return *k;
  }

  bool feed_canonical(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::starts_with(line, "s ")) {
      const auto status = text::trim(line.substr(2));
      if (status == "SATISFIABLE" || status == "UNSATISFIABLE") {
        answered_ = true;
      } else if (status != "INDETERMINATE" && status != "UNKNOWN") {
        malformed("unknown status line");
      }
      return false;
    }
    if (text::starts_with(line, "c [iter-end ")) {
      const auto k = bracketed_index(line.substr(12));
      if (!open_) malformed("iter-end without open block");
      if (k != open_->iteration_index) malformed("iter-end index does not match open block");
      for (Stat s : kAllStats) {
        if (!seen_[static_cast<std::size_t>(s)])
          throw Error(Errc::MissingField,
                      "iteration " + std::to_string(k) + " lacks field " + std::string(stat_name(s)),
                      line_no_);
      }
      if (auto bad = record_violation(*open_)) malformed(*bad);
      trace_.records.push_back(*open_);
      open_.reset();
      return true;
    }
    if (text::starts_with(line, "c [iter ")) {
      const auto k = bracketed_index(line.substr(8));
      if (open_) malformed("iteration block opened before previous one closed");
      const auto expected = static_cast<std::int64_t>(trace_.records.size()) + 1;
      if (k != expected)
        throw Error(Errc::NonConsecutiveIteration,
                    "expected " + std::to_string(expected) + ", got " + std::to_string(k), line_no_);
      open_ = IterationRecord{};
      open_->iteration_index = k;
      seen_.fill(false);
      return false;
    }
    if (text::starts_with(line, "c [stat] ")) {
      if (!open_) malformed("stat line outside an iteration block");
      const auto body = line.substr(9);
      const auto colon = body.find(':');
      if (colon == std::string_view::npos) malformed("stat line without ':'");
      const auto stat = stat_from_name(text::trim(body.substr(0, colon)));
      if (!stat) malformed("unknown stat name");
      const auto value = text::parse_double(body.substr(colon + 1));
      if (!value) malformed("bad stat value");
      auto& seen = seen_[static_cast<std::size_t>(*stat)];
      if (seen) malformed("duplicate stat in block");
      seen = true;
      open_->set(*stat, *value);
      return false;
    }
    if (text::starts_with(line, "c [outcome] ")) {
      std::istringstream in{std::string(line.substr(12))};
      std::string kind, secs, extra;
      in >> kind >> secs;
      const auto value = text::parse_double(secs);
      if (!value || !(*value > 0.0) || (in >> extra)) malformed("bad outcome value");
      if (kind == "terminated") {
        trace_.outcome = Outcome::terminated(*value);
      } else if (kind == "timeout") {
        trace_.outcome = Outcome::timed_out(*value);
      } else {
        malformed("unknown outcome kind");
      }
      return false;
    }
    // Everything else, including other bracketed comment tags, is not
    // statistics output.
    return false;
  }

  std::shared_ptr<const StatsAdapter> adapter_;
  RunTrace trace_;
  std::optional<IterationRecord> open_;
  std::array<bool, kStatCount> seen_{};
  std::vector<std::string> scratch_;
  std::size_t line_no_ = 0;
  bool answered_ = false;
};

inline RunTrace parse_stats_stream(std::istream& lines, std::string_view adapter = "canonical",
                                   std::string run_id = {}, std::string instance_id = {}) {
  StatsStreamParser parser(AdapterRegistry::instance().find(adapter), std::move(run_id),
                           std::move(instance_id));
  std::string line;
  while (std::getline(lines, line)) parser.feed(line);
  return std::move(parser).take();
}

inline RunTrace parse_stats_stream(std::string_view text_in, std::string_view adapter = "canonical",
                                   std::string run_id = {}, std::string instance_id = {}) {
  std::istringstream in{std::string(text_in)};
  return parse_stats_stream(in, adapter, std::move(run_id), std::move(instance_id));
}

/// Renders a trace in the canonical stats grammar (what a solver wrapper
/// would print).
inline std::string render_stats_stream(const RunTrace& trace) {
  std::string out;
  for (const auto& r : trace.records) {
    out += "c [iter " + std::to_string(r.iteration_index) + "]\n";
    for (Stat s : kAllStats)
      out += "c [stat] " + std::string(stat_name(s)) + ": " + text::format_double(r.get(s)) + "\n";
    out += "c [iter-end " + std::to_string(r.iteration_index) + "]\n";
  }
  switch (trace.outcome.kind) {
    case Outcome::Kind::Terminated:
      out += "s SATISFIABLE\n";
      out += "c [outcome] terminated " + text::format_double(trace.outcome.seconds) + "\n";
      break;
    case Outcome::Kind::TimedOut:
      out += "s INDETERMINATE\n";
      out += "c [outcome] timeout " + text::format_double(trace.outcome.seconds) + "\n";
      break;
    case Outcome::Kind::StillRunning: break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical CSV

inline constexpr std::string_view kCanonicalCsvHeader =
    "run_id,instance_id,iteration_index,all_threads,conflicts_per_sec,blocked_restarts,restarts,"
    "props_per_decision,props_per_conflict,literals_per_conflict,decisions_per_conflict,outcome,"
    "outcome_seconds";

inline constexpr std::size_t kCanonicalCsvColumns = 13;

/// A trace without records is written as a single row with empty
/// iteration and stat cells.
inline std::string serialize_canonical_csv(const std::vector<RunTrace>& traces) {
  std::string out(kCanonicalCsvHeader);
  out += '\n';
  for (const auto& t : traces) {
    std::string tail = "," + std::string(outcome_name(t.outcome.kind)) + ",";
    if (t.outcome.kind != Outcome::Kind::StillRunning) tail += text::format_double(t.outcome.seconds);
    tail += '\n';
    const std::string head = text::csv_escape(t.run_id) + "," + text::csv_escape(t.instance_id);
    if (t.records.empty()) {
      out += head + ",,,,,,,,," + tail;
      continue;
    }
    for (const auto& r : t.records) {
      out += head + "," + std::to_string(r.iteration_index);
      for (Stat s : kAllStats) out += "," + text::format_double(r.get(s));
      out += tail;
    }
  }
  return out;
}

inline std::vector<RunTrace> parse_canonical_csv(std::istream& in) {
  std::vector<RunTrace> traces;
  std::map<std::string, bool> seen_ids;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw Error(Errc::HeaderMismatch, "missing header", 1);
  ++line_no;
  text::strip_cr(line);
  if (line != kCanonicalCsvHeader) throw Error(Errc::HeaderMismatch, "unexpected header", 1);

  bool current_empty = false;  // current trace is an explicit zero-record row
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (text::trim(line).empty()) continue;
    auto fields = text::split_csv(line);
    if (!fields || fields->size() != kCanonicalCsvColumns)
      throw Error(Errc::RowArity, "line " + std::to_string(line_no) + ": expected 13 fields", line_no);
    const auto& f = *fields;

    Outcome outcome;
    if (f[11] == "terminated" || f[11] == "timed_out") {
      auto secs = text::parse_double(f[12]);
      if (!secs || !(*secs > 0.0))
        throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": bad outcome_seconds", line_no);
      outcome = f[11] == "terminated" ? Outcome::terminated(*secs) : Outcome::timed_out(*secs);
    } else if (f[11] != "still_running" || !f[12].empty()) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": bad outcome", line_no);
    }

    const bool continues = !traces.empty() && traces.back().run_id == f[0];
    if (continues) {
      const auto& t = traces.back();
      if (t.instance_id != f[1] || !(t.outcome == outcome) || current_empty)
        throw Error(Errc::InconsistentRun, "line " + std::to_string(line_no) + ": run '" + f[0] + "' changes metadata", line_no);
    } else {
      if (seen_ids.count(f[0]))
        throw Error(Errc::InconsistentRun, "line " + std::to_string(line_no) + ": run '" + f[0] + "' is not contiguous", line_no);
      seen_ids[f[0]] = true;
      traces.push_back(RunTrace{f[0], f[1], {}, outcome});
      current_empty = false;
    }
    auto& trace = traces.back();

    bool all_blank = f[2].empty();
    for (std::size_t c = 3; c < 11; ++c) all_blank = all_blank && f[c].empty();
    if (all_blank) {
      if (continues) throw Error(Errc::InconsistentRun, "line " + std::to_string(line_no) + ": empty row inside a run", line_no);
      current_empty = true;
      continue;
    }

    const auto index = text::parse_int(f[2]);
    if (!index) throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": bad iteration_index", line_no);
    const auto expected = static_cast<std::int64_t>(trace.records.size()) + 1;
    if (*index != expected)
      throw Error(Errc::NonConsecutiveIteration,
                  "expected " + std::to_string(expected) + ", got " + std::to_string(*index), line_no);
    IterationRecord r;
    r.iteration_index = *index;
    for (std::size_t i = 0; i < kStatCount; ++i) {
      const auto& cell = f[3 + i];
      if (text::trim(cell).empty())
        throw Error(Errc::MissingField,
                    "iteration " + std::to_string(*index) + " lacks field " + std::string(stat_name(kAllStats[i])),
                    line_no);
      auto v = text::parse_double(cell);
      if (!v) throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": bad number", line_no);
      r.set(kAllStats[i], *v);
    }
    if (auto bad = record_violation(r))
      throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": " + *bad, line_no);
    trace.records.push_back(r);
  }
  return traces;
}

inline std::vector<RunTrace> parse_canonical_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  return parse_canonical_csv(in);
}

}  // namespace satpredict
