#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "stormcast/core.hpp"
#include "stormcast/csv.hpp"

namespace stormcast::eval {

struct ExternalEvent {
  std::int64_t begin = 0;          // UTC seconds
  std::int64_t end = 0;            // valid only when has_end
  bool has_end = false;
  double customers = kMissing;     // missing or zero means unreported
  bool parse_error = false;
  std::string raw_begin, raw_end;
};

enum class MatchConfidence { High, Medium, Low };

inline const char* to_string(MatchConfidence c) {
  switch (c) {
    case MatchConfidence::High: return "High";
    case MatchConfidence::Medium: return "Medium";
    default: return "Low";
  }
}

struct Oe417Row {
  std::int64_t window_begin = 0;
  std::int64_t window_end = 0;
  bool window_incomplete = false;       // some member had no end timestamp
  double external_customers = kMissing; // absent unless all members reported
  double internal_max = kMissing;
  std::int64_t internal_peak_hour = 0;
  double delta_pct = kMissing;          // absent iff external magnitude absent
  MatchConfidence confidence = MatchConfidence::Low;
  std::string note;
  int n_members = 1;
};

// `begin_utc,end_utc,customers`; empty end = open window, empty or zero
// customers = magnitude unreported (e.g. loss of monitoring).
inline std::vector<ExternalEvent> load_external_events_csv(
    const std::string& path) {
  CsvTable t = read_csv(path);
  int c_b = t.column("begin_utc"), c_e = t.column("end_utc"),
      c_c = t.column("customers");
  if (c_b < 0 || c_e < 0 || c_c < 0)
    throw std::runtime_error(path + ": expected begin_utc,end_utc,customers");
  std::vector<ExternalEvent> out;
  for (const auto& row : t.rows) {
    ExternalEvent e;
    e.raw_begin = row[c_b];
    e.raw_end = row[c_e];
    if (!parse_utc(row[c_b], e.begin)) e.parse_error = true;
    if (!row[c_e].empty()) {
      if (parse_utc(row[c_e], e.end))
        e.has_end = true;
      else
        e.parse_error = true;
    }
    if (!row[c_c].empty()) {
      try {
        e.customers = parse_cell(row[c_c]);
      } catch (const std::exception&) {
        e.parse_error = true;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

// Reconciles an internal hourly state series against external incident
// reports. Entries whose windows overlap are treated as one multi-day event:
// the window is their union and magnitudes are summed, but only when every
// member reports one (a zero counts as unreported). Confidence follows the
// peak alignment and |delta| bands; unreported magnitudes are always Low.
inline std::vector<Oe417Row> oe417_reconcile(
    const std::vector<double>& state_series, std::int64_t series_start_hour,
    std::vector<ExternalEvent> events, int open_window_hours = 48) {
  std::vector<Oe417Row> rows;
  // Unparseable entries become standalone Low rows.
  std::vector<ExternalEvent> good;
  for (auto& e : events) {
    if (e.parse_error) {
      Oe417Row r;
      r.confidence = MatchConfidence::Low;
      r.note = "unparseable window: '" + e.raw_begin + "' - '" + e.raw_end + "'";
      rows.push_back(std::move(r));
    } else {
      good.push_back(std::move(e));
    }
  }
  std::sort(good.begin(), good.end(),
            [](const ExternalEvent& a, const ExternalEvent& b) {
              return a.begin < b.begin;
            });

  struct Group {
    std::int64_t begin = 0, end = 0;
    bool incomplete = false;
    bool all_reported = true;
    double total = 0;
    int members = 0;
  };
  std::vector<Group> groups;
  for (const auto& e : good) {
    std::int64_t span_end = e.has_end ? e.end : e.begin;  // point for overlap
    bool reported = !is_missing(e.customers) && e.customers > 0;
    if (!groups.empty() && e.begin <= groups.back().end) {
      Group& g = groups.back();
      g.end = std::max(g.end, span_end);
      g.incomplete = g.incomplete || !e.has_end;
      g.all_reported = g.all_reported && reported;
      if (reported) g.total += e.customers;
      ++g.members;
    } else {
      Group g;
      g.begin = e.begin;
      g.end = span_end;
      g.incomplete = !e.has_end;
      g.all_reported = reported;
      g.total = reported ? e.customers : 0;
      g.members = 1;
      groups.push_back(g);
    }
  }

  std::int64_t n_hours = static_cast<std::int64_t>(state_series.size());
  for (const Group& g : groups) {
    Oe417Row r;
    r.n_members = g.members;
    r.window_begin = g.begin;
    r.window_incomplete = g.incomplete;
    std::int64_t end = g.end;
    if (g.incomplete)
      end = std::max(end, g.begin + static_cast<std::int64_t>(open_window_hours) * 3600);
    r.window_end = end;

    std::int64_t h_lo = std::max<std::int64_t>(hour_of(g.begin) - series_start_hour, 0);
    std::int64_t h_hi = std::min<std::int64_t>(hour_of(end) - series_start_hour,
                                               n_hours - 1);
    for (std::int64_t h = h_lo; h <= h_hi; ++h) {
      double v = state_series[static_cast<std::size_t>(h)];
      if (is_missing(v)) continue;
      if (is_missing(r.internal_max) || v > r.internal_max) {
        r.internal_max = v;
        r.internal_peak_hour = series_start_hour + h;
      }
    }
    if (h_lo > h_hi) r.note = "window outside internal series";

    if (g.all_reported && g.total > 0) {
      r.external_customers = g.total;
      if (!is_missing(r.internal_max))
        r.delta_pct = (r.internal_max - g.total) / g.total * 100.0;
    }

    if (is_missing(r.delta_pct)) {
      r.confidence = MatchConfidence::Low;
      if (!g.all_reported) r.note = "magnitude unreported";
    } else {
      // Peak offset: hours between the internal peak and the window.
      std::int64_t peak_sec = r.internal_peak_hour * 3600;
      std::int64_t off_sec = 0;
      if (peak_sec < g.begin)
        off_sec = g.begin - peak_sec;
      else if (peak_sec > end)
        off_sec = peak_sec - end;
      double off_hours = static_cast<double>(off_sec) / 3600.0;
      double abs_delta = std::abs(r.delta_pct);
      if (off_hours <= 6.0 && abs_delta <= 15.0 && !g.incomplete)
        r.confidence = MatchConfidence::High;
      else if ((off_hours <= 12.0 && abs_delta <= 40.0) || g.incomplete)
        r.confidence = MatchConfidence::Medium;
      else
        r.confidence = MatchConfidence::Low;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace stormcast::eval
