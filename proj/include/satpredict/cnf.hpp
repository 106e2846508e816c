#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "satpredict/error.hpp"
#include "satpredict/text.hpp"

namespace satpredict {

using Clause = std::vector<std::int64_t>;

struct CnfInstance {
  std::int64_t num_vars = 0;
  std::vector<Clause> clauses;

  std::size_t num_clauses() const { return clauses.size(); }
  bool operator==(const CnfInstance&) const = default;
};

/// Five-number summary with type-7 (linear between closest ranks) quartiles.
struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  bool operator==(const Quartiles&) const = default;
};

struct InstanceFeatures {
  std::int64_t num_vars = 0;
  std::size_t num_clauses = 0;
  double density = 0.0;
  Quartiles clause_len;
  std::size_t total_literal_occurrences = 0;
  std::map<std::size_t, double> clause_len_fractions;
  double mean_literal_occurrence = 0.0;

  bool operator==(const InstanceFeatures&) const = default;
};

inline CnfInstance parse_dimacs(std::istream& in) {
  CnfInstance inst;
  bool have_header = false;
  std::int64_t declared = 0;
  Clause current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == 'c') continue;
    if (body.front() == '%') break;  // SATLIB end marker
    if (body.front() == 'p') {
      if (have_header) throw Error(Errc::MalformedLine, "second header", line_no);
      std::istringstream hs{std::string(body)};
      std::string p, fmt, extra;
      std::int64_t vars = -1, ncl = -1;
      if (!(hs >> p >> fmt >> vars >> ncl) || p != "p" || fmt != "cnf" || vars < 0 || ncl < 0 || (hs >> extra))
        throw Error(Errc::NoHeader, "malformed 'p cnf' header", line_no);
      inst.num_vars = vars;
      declared = ncl;
      have_header = true;
      continue;
    }
    if (!have_header) throw Error(Errc::NoHeader, "clause data before 'p cnf' header", line_no);
    std::istringstream ls{std::string(body)};
    std::string tok;
    while (ls >> tok) {
      const auto lit = text::parse_int(tok);
      if (!lit) throw Error(Errc::MalformedLine, "bad literal '" + tok + "'", line_no);
      if (*lit == 0) {
        if (current.empty())
          throw Error(Errc::EmptyClause, "clause " + std::to_string(inst.clauses.size()) + " is empty", line_no);
        inst.clauses.push_back(std::move(current));
        current.clear();
        continue;
      }
      if (std::llabs(*lit) > inst.num_vars)
        throw Error(Errc::LiteralOutOfRange, "literal " + std::to_string(*lit), line_no);
      current.push_back(*lit);
    }
  }
  if (!have_header) throw Error(Errc::NoHeader, "no 'p cnf' header");
  if (!current.empty()) inst.clauses.push_back(std::move(current));  // final clause missing its 0
  if (static_cast<std::int64_t>(inst.clauses.size()) != declared)
    throw Error(Errc::ClauseCountMismatch,
                "declared " + std::to_string(declared) + ", found " + std::to_string(inst.clauses.size()));
  return inst;
}

inline CnfInstance parse_dimacs(std::string_view dimacs) {
  std::istringstream in{std::string(dimacs)};
  return parse_dimacs(in);
}

inline Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::EmptyInput, "quartiles of an empty list");
  std::sort(values.begin(), values.end());
  const auto at = [&](double p) {
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

// Occurrences averaged over the 2L signed literals.
inline double mean_literal_occurrence(std::size_t total_occurrences, std::int64_t num_vars) {
  return static_cast<double>(total_occurrences) / (2.0 * static_cast<double>(num_vars));
}

inline InstanceFeatures instance_features(const CnfInstance& inst) {
  if (inst.clauses.empty() || inst.num_vars < 1)
    throw Error(Errc::EmptyInput, "instance has no clauses or no variables");
  InstanceFeatures f;
  f.num_vars = inst.num_vars;
  f.num_clauses = inst.clauses.size();
  f.density = static_cast<double>(f.num_clauses) / static_cast<double>(f.num_vars);

  std::vector<double> lengths;
  lengths.reserve(inst.clauses.size());
  std::map<std::size_t, std::size_t> by_len;
  for (const auto& c : inst.clauses) {
    lengths.push_back(static_cast<double>(c.size()));
    f.total_literal_occurrences += c.size();
    ++by_len[c.size()];
  }
  f.clause_len = quartiles(std::move(lengths));
  for (const auto& [len, count] : by_len)
    f.clause_len_fractions[len] = static_cast<double>(count) / static_cast<double>(f.num_clauses);
  f.mean_literal_occurrence = mean_literal_occurrence(f.total_literal_occurrences, f.num_vars);
  return f;
}

}  // namespace satpredict
