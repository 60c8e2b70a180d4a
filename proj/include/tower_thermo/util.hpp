#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace tower_thermo {

using json = nlohmann::json;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Worker count: TOWER_THERMO_THREADS if set and positive, else hardware concurrency.
inline unsigned thread_count() {
  if (const char* s = std::getenv("TOWER_THERMO_THREADS")) {
    const long v = std::strtol(s, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so that
// the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

// Streaming log-sum-exp.
class LogSum {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x <= m_) {
      s_ += std::exp(x - m_);
    } else {
      s_ = s_ * std::exp(m_ - x) + 1.0;
      m_ = x;
    }
  }
  void merge(const LogSum& o) {
    if (o.m_ == kNegInf) return;
    if (m_ == kNegInf) {
      *this = o;
      return;
    }
    if (o.m_ <= m_) {
      s_ += o.s_ * std::exp(o.m_ - m_);
    } else {
      s_ = s_ * std::exp(m_ - o.m_) + o.s_;
      m_ = o.m_;
    }
  }
  double value() const { return m_ == kNegInf ? kNegInf : m_ + std::log(s_); }

 private:
  double m_ = kNegInf;
  double s_ = 0.0;
};

inline double log_sum_exp(std::span<const double> xs) {
  LogSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

inline std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// JSON number, or a string tag for non-finite values.
inline json num(double x) {
  if (std::isfinite(x)) return x;
  return fmt17(x);
}

inline json num_array(std::span<const double> xs) {
  json a = json::array();
  for (double x : xs) a.push_back(num(x));
  return a;
}

inline double json_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return kInf;
  if (s == "-inf") return kNegInf;
  return std::numeric_limits<double>::quiet_NaN();
}

// JSON text with every floating value written as %.17g.
inline void dump17(const json& j, std::string& out, int indent = 2, int depth = 0) {
  const std::string pad = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string end = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  if (j.is_number_float()) {
    out += fmt17(j.get<double>());
  } else if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += '{';
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ',';
      first = false;
      out += pad + json(it.key()).dump() + (indent > 0 ? ": " : ":");
      dump17(it.value(), out, indent, depth + 1);
    }
    out += end + '}';
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    out += '[';
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ',';
      out += pad;
      dump17(j[i], out, indent, depth + 1);
    }
    out += end + ']';
  } else {
    out += j.dump();
  }
}

inline std::string dump17(const json& j, int indent = 2) {
  std::string s;
  dump17(j, s, indent);
  return s;
}

// Ordinary least-squares slope of y on x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace tower_thermo
