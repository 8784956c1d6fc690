#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace stormcast {

// Missing observations are carried as quiet NaN so vectors stay dense.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// ---------------------------------------------------------------------------
// Time. All timestamps are UTC; internally we use seconds (or whole hours)
// since the Unix epoch. No time zones, no leap-second handling.
// ---------------------------------------------------------------------------

// Howard Hinnant's algorithm, civil date -> days since 1970-01-01.
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

// Parses "YYYY-MM-DD[ T]hh:mm[:ss][Z]" as UTC epoch seconds.
// Returns false on malformed input.
inline bool parse_utc(const std::string& s, std::int64_t& out_sec) {
  int y = 0;
  unsigned mo = 0, da = 0, hh = 0, mi = 0, ss = 0;
  const char* p = s.c_str();
  auto num = [&](int width, auto& v) -> bool {
    v = 0;
    for (int i = 0; i < width; ++i) {
      if (*p < '0' || *p > '9') return false;
      v = v * 10 + (*p++ - '0');
    }
    return true;
  };
  if (!num(4, y) || *p++ != '-' || !num(2, mo) || *p++ != '-' || !num(2, da))
    return false;
  if (*p == ' ' || *p == 'T') {
    ++p;
    if (!num(2, hh) || *p++ != ':' || !num(2, mi)) return false;
    if (*p == ':') {
      ++p;
      if (!num(2, ss)) return false;
    }
    if (*p == 'Z') ++p;
  }
  if (*p != '\0') return false;
  if (mo < 1 || mo > 12 || da < 1 || da > 31 || hh > 23 || mi > 59 || ss > 59)
    return false;
  out_sec = days_from_civil(y, mo, da) * 86400 + hh * 3600 + mi * 60 + ss;
  return true;
}

inline std::int64_t parse_utc_or_throw(const std::string& s) {
  std::int64_t t = 0;
  if (!parse_utc(s, t)) throw std::invalid_argument("bad timestamp: " + s);
  return t;
}

inline std::string format_utc(std::int64_t sec) {
  std::int64_t days = sec / 86400;
  std::int64_t rem = sec % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y;
  unsigned mo, da;
  civil_from_days(days, y, mo, da);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", y, mo,
                da, static_cast<long long>(rem / 3600),
                static_cast<long long>((rem % 3600) / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

inline std::int64_t hour_of(std::int64_t sec) {
  return sec >= 0 ? sec / 3600 : (sec - 3599) / 3600;
}

inline std::string format_hour(std::int64_t hour) {
  return format_utc(hour * 3600);
}

// Monday = 0 .. Sunday = 6.
inline int day_of_week(std::int64_t hour) {
  std::int64_t days = hour >= 0 ? hour / 24 : (hour - 23) / 24;
  // 1970-01-01 was a Thursday (3 in Monday-based numbering).
  std::int64_t dow = (days + 3) % 7;
  return static_cast<int>(dow < 0 ? dow + 7 : dow);
}

// ---------------------------------------------------------------------------
// Small statistics helpers over dense vectors (NaN-aware where noted).
// ---------------------------------------------------------------------------

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? kMissing : s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Linear-interpolation quantile (the common "type 7" rule), q in [0,1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return kMissing;
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  double pos = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// Sample Pearson correlation over pairs where both entries are present.
// Zero-variance input yields 0 with *degenerate = true.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b,
                      bool* degenerate = nullptr) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (is_missing(a[i]) || is_missing(b[i])) continue;
    sx += a[i];
    sy += b[i];
    ++n;
  }
  if (degenerate) *degenerate = false;
  if (n < 2) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (is_missing(a[i]) || is_missing(b[i])) continue;
    sxy += (a[i] - mx) * (b[i] - my);
    sxx += (a[i] - mx) * (a[i] - mx);
    syy += (b[i] - my) * (b[i] - my);
  }
  if (sxx <= 0 || syy <= 0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 output is pinned by the standard; we avoid
// std::*_distribution because their draw sequences are implementation
// defined. Streams derived from (seed, index) are independent of scheduling.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x51ed270b4d5287aaULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0,1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased for any n.
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  double normal(double mu = 0.0, double sigma = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mu + sigma * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return mu + sigma * u * f;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[uniform_index(i)]);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// parallel_for: chunks [0,n) over hardware threads. Work items must write to
// disjoint outputs; results are then independent of scheduling.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned max_threads = 0) {
  unsigned hw = max_threads ? max_threads : std::thread::hardware_concurrency();
  if (hw <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace stormcast
