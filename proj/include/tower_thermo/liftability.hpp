#pragma once

// Counting diagnostics for liftability: S_n (elements with tau = n), S'_n
// (first returns), S*_n (the rest), the fitted exponent h and the entropy
// function sigma(x) = -x log x - (1-x) log(1-x).

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tower_thermo/tower.hpp"

namespace tower_thermo {

struct CountProfile {
  std::vector<double> S, S_first, S_star;  // index n - 1
  double h_fit = 0.0;
  std::optional<double> h_declared;

  int horizon() const { return static_cast<int>(S.size()); }

  std::string to_csv() const {
    std::ostringstream o;
    o << "n,S_n,S_first,S_star\n";
    for (std::size_t i = 0; i < S.size(); ++i)
      o << i + 1 << ',' << fmt17(S[i]) << ',' << fmt17(S_first[i]) << ',' << fmt17(S_star[i]) << '\n';
    return o.str();
  }
  json to_json() const {
    json j{{"S_n", num_array(S)}, {"S_first", num_array(S_first)}, {"S_star", num_array(S_star)}, {"h_fit", num(h_fit)}};
    if (h_declared) j["h_declared"] = *h_declared;
    return j;
  }
};

// Least squares slope of log counts over the upper half of n, zero counts skipped.
inline double fit_count_exponent(const std::vector<double>& counts) {
  std::vector<double> xs, ys;
  const auto n = counts.size();
  for (std::size_t i = n / 2; i < n; ++i)
    if (counts[i] > 0.0) {
      xs.push_back(static_cast<double>(i + 1));
      ys.push_back(std::log(counts[i]));
    }
  return xs.size() >= 2 ? ls_slope(xs, ys) : 0.0;
}

inline CountProfile make_profile(std::vector<double> S_first, std::vector<double> S_star) {
  TT_REQUIRE(S_first.size() == S_star.size(), InvalidInput, "count sequences differ in length");
  CountProfile p;
  p.S_first = std::move(S_first);
  p.S_star = std::move(S_star);
  for (std::size_t i = 0; i < p.S_first.size(); ++i) p.S.push_back(p.S_first[i] + p.S_star[i]);
  p.h_fit = fit_count_exponent(p.S);
  return p;
}

inline CountProfile count_profile(const InducingScheme& s) {
  const int T = std::max(s.horizon, s.max_tau());
  std::vector<double> first(static_cast<std::size_t>(T), 0.0), star(static_cast<std::size_t>(T), 0.0);
  for (const auto& e : s.elements) (e.first_return ? first : star)[static_cast<std::size_t>(e.tau - 1)] += e.multiplicity;
  return make_profile(std::move(first), std::move(star));
}

struct L2Report {
  bool pass = true;
  double minimal_h = 0.0;  // smallest h with S*_n <= e^{hn} beyond burn-in
  bool super_exponential = false;
  json to_json() const { return json{{"pass", pass}, {"minimal_h", num(minimal_h)}, {"super_exponential", super_exponential}}; }
};

inline L2Report check_L2(const CountProfile& p, double h, int burn_in = 0) {
  TT_REQUIRE(h > 0.0, InvalidInput, "check_L2 needs h > 0");
  L2Report r;
  std::vector<double> lr_x, lr_y;
  for (int n = burn_in + 1; n <= p.horizon(); ++n) {
    const double s = p.S_star[static_cast<std::size_t>(n - 1)];
    if (s <= 0.0) continue;
    const double e = std::log(s) / n;
    r.minimal_h = std::max(r.minimal_h, e);
    if (e > h) r.pass = false;
    const double prev = n >= 2 ? p.S_star[static_cast<std::size_t>(n - 2)] : 0.0;
    if (prev > 0.0 && n > p.horizon() / 2) {
      lr_x.push_back(n);
      lr_y.push_back(std::log(s / prev));
    }
  }
  // growth ratios S*_{n+1}/S*_n that keep increasing mean no exponential bound
  if (lr_x.size() >= 3) {
    const double slope = ls_slope(lr_x, lr_y);
    r.super_exponential = slope > 0.02;
  }
  if (r.super_exponential) r.pass = false;
  return r;
}

inline double sigma_entropy(double x) {
  TT_REQUIRE(x >= 0.0 && x <= 1.0, std::domain_error, "sigma_entropy needs 0 <= x <= 1");
  auto t = [](double y) { return y > 0.0 ? -y * std::log(y) : 0.0; };
  return t(x) + t(1.0 - x);
}

// Exact binomial coefficient for n <= 60.
inline std::uint64_t binomial(int n, int m) {
  TT_REQUIRE(0 <= m && m <= n && n <= 60, InvalidInput, "binomial needs 0 <= m <= n <= 60");
  m = std::min(m, n - m);
  std::uint64_t c = 1;
  for (int k = 1; k <= m; ++k) c = c * static_cast<std::uint64_t>(n - m + k) / static_cast<std::uint64_t>(k);
  return c;
}

struct BinomialBound {
  bool holds = true;
  double slack = 0.0;  // n sigma(m/n) - log C(n, m)
};

inline BinomialBound binomial_bound_check(int n, int m) {
  const double lc = std::log(static_cast<double>(binomial(n, m)));
  const double rhs = n == 0 ? 0.0 : n * sigma_entropy(static_cast<double>(m) / n);
  return {lc <= rhs + 1e-12, rhs - lc};
}

}  // namespace tower_thermo
