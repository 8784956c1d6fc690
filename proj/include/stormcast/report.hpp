#pragma once

#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "stormcast/bootstrap.hpp"
#include "stormcast/core.hpp"
#include "stormcast/events.hpp"
#include "stormcast/metrics.hpp"
#include "stormcast/oe417.hpp"

namespace stormcast::report {

using json = nlohmann::json;

inline json num_or_null(double v) {
  return is_missing(v) ? json(nullptr) : json(v);
}

inline json confusion_json(const eval::Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline json overall_json(const eval::OverallMetrics& m) {
  return {{"rmse", num_or_null(m.rmse)},
          {"mae", num_or_null(m.mae)},
          {"r2", num_or_null(m.r2)},
          {"mase", num_or_null(m.mase)},
          {"n", m.n}};
}

inline json cmase_json(const std::vector<eval::CmaseEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    json j = {{"delta", e.delta},
              {"n_hours", e.n_hours},
              {"value", num_or_null(e.value)}};
    if (!e.reason.empty()) j["reason"] = e.reason;
    arr.push_back(j);
  }
  return arr;
}

inline json events_json(const std::vector<eval::MatchResult>& matches) {
  json windows = json::array();
  for (const auto& m : matches) {
    eval::EventScores s = eval::event_prf(m);
    windows.push_back({{"omega", m.omega},
                       {"hits", m.hits()},
                       {"miss", m.misses.size()},
                       {"fa", m.false_alarms.size()},
                       {"p", num_or_null(s.precision)},
                       {"r", num_or_null(s.recall)},
                       {"f1", num_or_null(s.f1)}});
  }
  return {{"windows", windows}};
}

inline json interval_json(const eval::Interval& iv) {
  return {{"median", num_or_null(iv.median)},
          {"lo", num_or_null(iv.lo)},
          {"hi", num_or_null(iv.hi)},
          {"n", iv.n}};
}

inline json bootstrap_json(const eval::BootstrapSummary& s) {
  json cm = json::array();
  for (const auto& [delta, iv] : s.cmase_by_delta) {
    json j = interval_json(iv);
    j["delta"] = delta;
    cm.push_back(j);
  }
  json ev = json::array();
  for (const auto& [omega, iv] : s.recall_by_omega) {
    json j;
    j["omega"] = omega;
    j["recall"] = interval_json(iv);
    j["precision"] = interval_json(s.precision_by_omega.at(omega));
    j["f1"] = interval_json(s.f1_by_omega.at(omega));
    j["hits"] = interval_json(s.hits_by_omega.at(omega));
    ev.push_back(j);
  }
  return {{"B", s.config.replicates},
          {"block", s.config.block},
          {"seed", s.config.seed},
          {"cmase", cm},
          {"events", ev}};
}

inline json oe417_json(const std::vector<eval::Oe417Row>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json j;
    j["window_begin"] = format_utc(r.window_begin);
    j["window_end"] = format_utc(r.window_end);
    j["window_incomplete"] = r.window_incomplete;
    j["external_customers"] = num_or_null(r.external_customers);
    j["internal_max"] = num_or_null(r.internal_max);
    if (!is_missing(r.internal_max))
      j["internal_peak"] = format_hour(r.internal_peak_hour);
    j["delta_pct"] = num_or_null(r.delta_pct);
    j["confidence"] = to_string(r.confidence);
    if (!r.note.empty()) j["note"] = r.note;
    j["n_members"] = r.n_members;
    arr.push_back(j);
  }
  return arr;
}

// ---------------------------------------------------------------------------
// SVG figure: actual vs two-stage vs baseline state series with the peak
// threshold line. Text-templated, no plotting dependency.
// ---------------------------------------------------------------------------

struct SvgSeries {
  std::string label;
  std::string color;
  const std::vector<double>* values = nullptr;
};

inline void write_state_series_svg(const std::string& path,
                                   std::int64_t start_hour,
                                   const std::vector<SvgSeries>& series,
                                   double threshold) {
  const int width = 1200, height = 420;
  const int ml = 70, mr = 20, mt = 30, mb = 45;
  double ymax = threshold * 1.2;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values->size());
    for (double v : *s.values)
      if (!is_missing(v)) ymax = std::max(ymax, v * 1.05);
  }
  if (n < 2) n = 2;
  auto xpix = [&](std::size_t i) {
    return ml + (width - ml - mr) * static_cast<double>(i) /
                    static_cast<double>(n - 1);
  };
  auto ypix = [&](double v) {
    return mt + (height - mt - mb) * (1.0 - v / ymax);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes.
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
      << width - mr << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    double v = ymax * k / 4.0;
    out << "<text x=\"" << ml - 8 << "\" y=\"" << ypix(v) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">"
        << static_cast<long long>(std::llround(v)) << "</text>\n";
  }
  for (int k = 0; k <= 6; ++k) {
    std::size_t i = n == 1 ? 0 : (n - 1) * static_cast<std::size_t>(k) / 6;
    out << "<text x=\"" << xpix(i) << "\" y=\"" << height - mb + 16
        << "\" font-size=\"10\" text-anchor=\"middle\">"
        << format_hour(start_hour + static_cast<std::int64_t>(i)).substr(0, 10)
        << "</text>\n";
  }
  // Threshold line.
  out << "<line x1=\"" << ml << "\" y1=\"" << ypix(threshold) << "\" x2=\""
      << width - mr << "\" y2=\"" << ypix(threshold)
      << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  out << "<text x=\"" << width - mr - 4 << "\" y=\"" << ypix(threshold) - 5
      << "\" font-size=\"11\" text-anchor=\"end\" fill=\"gray\">"
      << static_cast<long long>(threshold) << "</text>\n";
  // Series.
  int legend_y = mt + 6;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.2\" points=\"";
    bool in_run = false;
    for (std::size_t i = 0; i < s.values->size(); ++i) {
      double v = (*s.values)[i];
      if (is_missing(v)) {
        if (in_run) {
          out << "\"/>\n<polyline fill=\"none\" stroke=\"" << s.color
              << "\" stroke-width=\"1.2\" points=\"";
          in_run = false;
        }
        continue;
      }
      out << xpix(i) << "," << ypix(std::max(v, 0.0)) << " ";
      in_run = true;
    }
    out << "\"/>\n";
    out << "<rect x=\"" << ml + 10 << "\" y=\"" << legend_y - 9
        << "\" width=\"14\" height=\"4\" fill=\"" << s.color << "\"/>\n";
    out << "<text x=\"" << ml + 30 << "\" y=\"" << legend_y
        << "\" font-size=\"12\">" << s.label << "</text>\n";
    legend_y += 16;
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
      << "\" font-size=\"12\" text-anchor=\"middle\">hour (UTC)</text>\n";
  out << "<text x=\"16\" y=\"" << height / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 16 " << height / 2
      << ")\" text-anchor=\"middle\">customers out</text>\n";
  out << "</svg>\n";
}

}  // namespace stormcast::report
