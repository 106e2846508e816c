#pragma once

// Diagnostic graphics as standalone SVG 1.1: per-run parameter evolution
// against cumulative solver time, and a pairwise scatterplot matrix of one
// iteration's features colored by label.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "satpredict/dataset.hpp"
#include "satpredict/error.hpp"
#include "satpredict/text.hpp"
#include "satpredict/trace.hpp"

namespace satpredict {

struct SeriesPoint {
  std::string run_id;
  double x = 0.0;  // cumulative all-threads time at iteration end
  double y = 0.0;
  bool operator==(const SeriesPoint&) const = default;
};

inline std::vector<SeriesPoint> evolution_series(std::span<const RunTrace> traces, std::string_view parameter_name) {
  const auto stat = stat_from_name(parameter_name);
  if (!stat) throw Error(Errc::UnknownParameter, "'" + std::string(parameter_name) + "' is not a stat name");
  std::vector<SeriesPoint> out;
  for (const auto& t : traces) {
    double x = 0.0;
    for (const auto& r : t.records) {
      x += r.all_threads_time;
      out.push_back({t.run_id, x, r.get(*stat)});
    }
  }
  return out;
}

inline std::string series_to_csv(std::span<const SeriesPoint> points) {
  std::string out = "run_id,x,y\n";
  for (const auto& p : points)
    out += text::csv_escape(p.run_id) + "," + text::format_double(p.x) + "," + text::format_double(p.y) + "\n";
  return out;
}

inline std::vector<SeriesPoint> series_from_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || (text::strip_cr(line), line != "run_id,x,y"))
    throw Error(Errc::HeaderMismatch, "expected 'run_id,x,y'", 1);
  std::vector<SeriesPoint> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (line.empty()) continue;
    auto f = text::split_csv(line);
    if (!f || f->size() != 3) throw Error(Errc::RowArity, "expected 3 fields", line_no);
    auto x = text::parse_double((*f)[1]);
    auto y = text::parse_double((*f)[2]);
    if (!x || !y) throw Error(Errc::MalformedLine, "bad number", line_no);
    out.push_back({(*f)[0], *x, *y});
  }
  return out;
}

struct PlotOptions {
  bool log_x = false;
  double width = 720;
  double height = 480;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Maps v into [0, 1]; a degenerate range maps to the middle.
  double unit(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }
};

inline const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

inline const char* label_color(Label l) { return l == Label::Timely ? "#2ca02c" : "#d62728"; }

inline std::string svg_open(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         num(w) + "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n" +
         "<rect x=\"0\" y=\"0\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" fill=\"white\"/>\n";
}

}  // namespace detail

/// Line chart, one polyline with iteration markers per run.
inline std::string evolution_svg(std::span<const SeriesPoint> points, std::string_view parameter_name,
                                 const PlotOptions& opt = {}) {
  using detail::num;
  const double left = 70, right = 160, top = 30, bottom = 50;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  const auto tx = [&](double x) { return opt.log_x ? std::log10(std::max(x, 1e-12)) : x; };

  detail::Range xr, yr;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SeriesPoint*>> runs;
  for (const auto& p : points) {
    xr.add(tx(p.x));
    yr.add(p.y);
    if (!runs.count(p.run_id)) order.push_back(p.run_id);
    runs[p.run_id].push_back(&p);
  }

  std::string svg = detail::svg_open(opt.width, opt.height);
  svg += "<title>" + text::xml_escape(parameter_name) + "</title>\n";
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(opt.height - 12) + "\" text-anchor=\"middle\">" +
         (opt.log_x ? "log10 cumulative all-threads time [s]" : "cumulative all-threads time [s]") + "</text>\n";
  svg += "<text x=\"16\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(top + ph / 2) + ")\">" + text::xml_escape(parameter_name) + "</text>\n";
  if (!points.empty()) {
    svg += "<text x=\"" + num(left) + "\" y=\"" + num(top + ph + 16) + "\" font-size=\"10\">" + text::format_double(xr.lo) + "</text>\n";
    svg += "<text x=\"" + num(left + pw) + "\" y=\"" + num(top + ph + 16) + "\" font-size=\"10\" text-anchor=\"end\">" +
           text::format_double(xr.hi) + "</text>\n";
    svg += "<text x=\"" + num(left - 4) + "\" y=\"" + num(top + ph) + "\" font-size=\"10\" text-anchor=\"end\">" +
           text::format_double(yr.lo) + "</text>\n";
    svg += "<text x=\"" + num(left - 4) + "\" y=\"" + num(top + 10) + "\" font-size=\"10\" text-anchor=\"end\">" +
           text::format_double(yr.hi) + "</text>\n";
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    const auto& pts = runs[order[k]];
    svg += "<g class=\"run\" data-run=\"" + text::xml_escape(order[k]) + "\">\n<polyline fill=\"none\" stroke=\"" +
           color + "\" points=\"";
    std::string markers;
    for (const auto* p : pts) {
      const double px = left + xr.unit(tx(p->x)) * pw;
      const double py = top + (1.0 - yr.unit(p->y)) * ph;
      svg += num(px) + "," + num(py) + " ";
      markers += "<circle cx=\"" + num(px) + "\" cy=\"" + num(py) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    svg += "\"/>\n" + markers + "</g>\n";
    const double ly = top + 14.0 * static_cast<double>(k + 1);
    svg += "<text x=\"" + num(left + pw + 10) + "\" y=\"" + num(ly) + "\" font-size=\"10\" fill=\"" + color + "\">" +
           text::xml_escape(order[k]) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

/// P x P grid for the P parameters of `iteration` (1-based). Every panel
/// plots every example; row r is the y parameter, column c the x parameter.
inline std::string scatter_matrix(const Dataset& ds, std::size_t iteration, double panel_size = 110) {
  using detail::num;
  if (iteration < 1 || iteration > ds.spec.iterations)
    throw Error(Errc::IterationOutOfRange, "iteration " + std::to_string(iteration) + " outside 1.." +
                                               std::to_string(ds.spec.iterations));
  const auto params = ds.spec.params();
  const std::size_t P = params.size();
  const std::size_t offset = (iteration - 1) * P;
  for (const auto& e : ds.examples)
    if (e.features.size() != ds.spec.dimension()) throw Error(Errc::LengthMismatch, "example has wrong arity");

  std::vector<detail::Range> ranges(P);
  for (const auto& e : ds.examples)
    for (std::size_t p = 0; p < P; ++p) ranges[p].add(e.features[offset + p]);

  const double margin = 90, gap = 6, pad = 5;
  const double side = margin + static_cast<double>(P) * (panel_size + gap);
  std::string svg = detail::svg_open(side + 20, side + 40);
  svg += "<title>iteration " + std::to_string(iteration) + " pairwise scatterplots</title>\n";

  for (std::size_t r = 0; r < P; ++r) {
    for (std::size_t c = 0; c < P; ++c) {
      const double x0 = margin + static_cast<double>(c) * (panel_size + gap);
      const double y0 = 20 + static_cast<double>(r) * (panel_size + gap);
      svg += "<g class=\"panel\" data-row=\"" + std::to_string(r) + "\" data-col=\"" + std::to_string(c) +
             "\" transform=\"translate(" + num(x0) + "," + num(y0) + ")\">\n";
      svg += "<rect x=\"0\" y=\"0\" width=\"" + num(panel_size) + "\" height=\"" + num(panel_size) +
             "\" fill=\"none\" stroke=\"#888\"/>\n";
      const double inner = panel_size - 2 * pad;
      for (const auto& e : ds.examples) {
        const double px = pad + ranges[c].unit(e.features[offset + c]) * inner;
        const double py = pad + (1.0 - ranges[r].unit(e.features[offset + r])) * inner;
        svg += "<circle class=\"point\" cx=\"" + num(px) + "\" cy=\"" + num(py) + "\" r=\"2\" fill=\"" +
               detail::label_color(e.label) + "\"/>\n";
      }
      svg += "</g>\n";
    }
  }
  for (std::size_t p = 0; p < P; ++p) {
    const auto name = text::xml_escape(stat_name(params[p]));
    const double mid = static_cast<double>(p) * (panel_size + gap) + panel_size / 2;
    svg += "<text class=\"xlabel\" x=\"" + num(margin + mid) + "\" y=\"" + num(side + 12) +
           "\" font-size=\"10\" text-anchor=\"middle\">" + name + "</text>\n";
    svg += "<text class=\"ylabel\" x=\"" + num(margin - 6) + "\" y=\"" + num(20 + mid) +
           "\" font-size=\"10\" text-anchor=\"end\">" + name + "</text>\n";
  }
  svg += "<text x=\"" + num(margin) + "\" y=\"" + num(side + 32) + "\" font-size=\"10\" fill=\"" +
         detail::label_color(Label::Timely) + "\">label 1 (timely)</text>\n";
  svg += "<text x=\"" + num(margin + 120) + "\" y=\"" + num(side + 32) + "\" font-size=\"10\" fill=\"" +
         detail::label_color(Label::NotTimely) + "\">label 0 (not timely)</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace satpredict
