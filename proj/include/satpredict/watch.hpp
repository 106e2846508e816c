#pragma once

// One-shot early classification of a live solver run.

#include <istream>
#include <memory>
#include <optional>
#include <string>

#include "satpredict/error.hpp"
#include "satpredict/nn.hpp"
#include "satpredict/text.hpp"
#include "satpredict/trace.hpp"

namespace satpredict {

struct WatchVerdict {
  Prediction prediction;
  std::size_t after_iter = 0;
};

/// Reads `in` until `k` iteration blocks have closed, then classifies the
/// prefix with the model's own K leading iterations. Stops reading at that
/// point. Returns nullopt if the stream ends first.
inline std::optional<WatchVerdict> watch_stream(std::istream& in, const TrainedModel& tm,
                                                std::shared_ptr<const StatsAdapter> adapter, std::size_t k,
                                                double threshold = 0.5, std::string run_id = "watch") {
  if (k < tm.spec.iterations)
    throw Error(Errc::BadConfig, "watch needs at least the model's " + std::to_string(tm.spec.iterations) + " iterations");
  StatsStreamParser parser(std::move(adapter), std::move(run_id));
  std::string line;
  while (std::getline(in, line)) {
    if (parser.feed(line) && parser.closed_iterations() >= k)
      return WatchVerdict{predict(tm, parser.trace(), threshold), k};
  }
  return std::nullopt;
}

inline std::string format_verdict(const WatchVerdict& v) {
  return "verdict=" + std::to_string(to_int(v.prediction.label)) + " p=" + text::format_double(v.prediction.probability) +
         " after_iter=" + std::to_string(v.after_iter);
}

}  // namespace satpredict
