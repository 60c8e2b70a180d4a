#pragma once

// Markov measures on truncated one-sided shifts; the Gibbs measure of a
// two-block potential; Gibbs-ratio and variational diagnostics.

#include <cmath>
#include <string>
#include <vector>

#include "tower_thermo/pressure.hpp"

namespace tower_thermo {

class MarkovMeasure {
 public:
  MarkovMeasure(std::vector<double> pi, std::vector<std::vector<double>> P) : pi_(std::move(pi)), P_(std::move(P)) {
    const auto N = pi_.size();
    TT_REQUIRE(N >= 1 && P_.size() == N, InvalidInput, "markov measure: pi and P sizes differ");
    double tot = 0.0;
    for (std::size_t a = 0; a < N; ++a) {
      TT_REQUIRE(P_[a].size() == N, InvalidInput, "markov measure: P must be square");
      TT_REQUIRE(pi_[a] >= 0.0, InvalidInput, "markov measure: negative stationary weight");
      double row = 0.0;
      for (double p : P_[a]) {
        TT_REQUIRE(p >= 0.0, InvalidInput, "markov measure: negative transition");
        row += p;
      }
      TT_REQUIRE(std::abs(row - 1.0) <= 1e-9, InvalidInput, "markov measure: rows must sum to 1");
      tot += pi_[a];
    }
    TT_REQUIRE(std::abs(tot - 1.0) <= 1e-9, InvalidInput, "markov measure: pi must sum to 1");
  }

  // Chain with P and its stationary vector (found by power iteration on pi P).
  static MarkovMeasure stationary(std::vector<std::vector<double>> P) {
    const auto N = P.size();
    std::vector<double> pi(N, 1.0 / static_cast<double>(N)), nxt(N);
    for (int it = 0; it < 200000; ++it) {
      std::fill(nxt.begin(), nxt.end(), 0.0);
      for (std::size_t a = 0; a < N; ++a)
        for (std::size_t b = 0; b < N; ++b) nxt[b] += pi[a] * P[a][b];
      // lazy average damps periodic chains
      double d = 0.0;
      for (std::size_t a = 0; a < N; ++a) {
        const double x = 0.5 * (pi[a] + nxt[a]);
        d = std::max(d, std::abs(x - pi[a]));
        pi[a] = x;
      }
      if (d < 1e-16) break;
    }
    double s = 0.0;
    for (double x : pi) s += x;
    for (double& x : pi) x /= s;
    return MarkovMeasure(std::move(pi), std::move(P));
  }

  static MarkovMeasure bernoulli(std::vector<double> p) {
    std::vector<std::vector<double>> P(p.size(), p);
    return MarkovMeasure(p, std::move(P));
  }

  int size() const { return static_cast<int>(pi_.size()); }
  const std::vector<double>& pi() const { return pi_; }
  const std::vector<std::vector<double>>& P() const { return P_; }

  double cylinder(std::span<const int> w) const {
    if (w.empty()) return 1.0;
    double m = pi_[static_cast<std::size_t>(w[0])];
    for (std::size_t k = 1; k < w.size(); ++k) m *= P_[static_cast<std::size_t>(w[k - 1])][static_cast<std::size_t>(w[k])];
    return m;
  }

  double entropy() const {
    double h = 0.0;
    for (std::size_t a = 0; a < pi_.size(); ++a)
      for (double p : P_[a])
        if (p > 0.0) h -= pi_[a] * p * std::log(p);
    return h;
  }

  // Integral of a one-sided potential: exact for blocks starting at 0,
  // otherwise through the two-block collapse.
  double integral(const Potential& phi) const {
    const int N = size();
    const auto* blk = phi.block();
    if (blk && blk->first >= 0 && std::pow(double(N), blk->first + blk->length) <= 4e6) {
      const int L = blk->first + blk->length;
      std::vector<int> w(static_cast<std::size_t>(L), 0);
      double s = 0.0;
      while (true) {
        const double m = cylinder(w);
        if (m > 0.0) s += m * blk->fn(std::span<const int>(w).subspan(static_cast<std::size_t>(blk->first)));
        int i = L - 1;
        while (i >= 0 && ++w[static_cast<std::size_t>(i)] == N) w[static_cast<std::size_t>(i--)] = 0;
        if (i < 0) break;
      }
      return s;
    }
    const auto T = transfer_matrix(phi, N, 2);
    double s = 0.0;
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) {
        const double m = pi_[static_cast<std::size_t>(a)] * P_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        if (m > 0.0) s += m * T.hat(a, b);
      }
    return s;
  }

  json to_json() const { return json{{"pi", pi_}, {"P", P_}}; }

 private:
  std::vector<double> pi_;
  std::vector<std::vector<double>> P_;
};

struct GibbsMeasureData {
  MarkovMeasure measure;
  double pressure;
  std::vector<double> right, left;
  double collapse_error;
};

// Markov measure pi_a = l_a h_a, P[a][b] = M[a][b] h_b / (rho h_a).
inline GibbsMeasureData gibbs_measure(const Potential& phi, int N = 0, int collapse_depth = 2,
                                      const PressureOptions& opt = {}) {
  if (N == 0) N = phi.alphabet_size();
  const auto T = transfer_matrix(phi, N, collapse_depth, opt);
  const auto pd = perron(T, opt);
  std::vector<double> pi(static_cast<std::size_t>(N));
  std::vector<std::vector<double>> P(static_cast<std::size_t>(N), std::vector<double>(static_cast<std::size_t>(N)));
  double tot = 0.0;
  for (int a = 0; a < N; ++a) tot += pi[static_cast<std::size_t>(a)] = pd.left[static_cast<std::size_t>(a)] * pd.right[static_cast<std::size_t>(a)];
  for (auto& x : pi) x /= tot;
  for (int a = 0; a < N; ++a) {
    double row = 0.0;
    for (int b = 0; b < N; ++b) {
      const double p = std::exp(T.log_at(a, b) - pd.log_rho) * pd.right[static_cast<std::size_t>(b)] /
                       pd.right[static_cast<std::size_t>(a)];
      P[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = p;
      row += p;
    }
    for (auto& p : P[static_cast<std::size_t>(a)]) p /= row;  // remove rounding drift
  }
  return {MarkovMeasure(std::move(pi), std::move(P)), pd.log_rho, pd.right, pd.left, T.collapse_error};
}

struct GibbsReport {
  double C0_observed = 1.0;
  int L = 0;
  double pressure_used = 0.0;
  std::vector<double> max_log_ratio;   // per length n = 1..L
  std::vector<double> mean_log_ratio;  // signed, averaged over all cylinders
  double growth_slope = 0.0;           // LS slope of max_log_ratio over n = 2..L
  double drift_slope = 0.0;            // LS slope of mean_log_ratio over n = 2..L
  bool growth_flag = false;
  std::string diagnostic;

  json to_json() const {
    return json{{"C0_observed", num(C0_observed)},
                {"L", L},
                {"pressure_used", num(pressure_used)},
                {"diagnostics",
                 {{"max_log_ratio", num_array(max_log_ratio)},
                  {"growth_slope", num(growth_slope)},
                  {"mean_log_ratio", num_array(mean_log_ratio)},
                  {"drift_slope", num(drift_slope)},
                  {"growth_flag", growth_flag},
                  {"message", diagnostic}}}};
  }
};

// Slope above which C0 is reported as growing with the cylinder length.
inline constexpr double kGibbsGrowthFlag = 0.05;

// Max over cylinders of length n <= L and over interior points (the word
// followed by each symbol, ends repeated) of |log ratio|.
inline GibbsReport verify_gibbs(const MarkovMeasure& nu, const Potential& phi, double pressure, int L) {
  TT_REQUIRE(L >= 1 && L <= 8, InvalidInput, "verify_gibbs needs 1 <= L <= 8");
  const int N = nu.size();
  TT_REQUIRE(N <= phi.alphabet_size(), InvalidInput, "measure alphabet exceeds potential alphabet");
  TT_REQUIRE(std::pow(double(N), L + 1) <= 4e7, ResourceError, "too many cylinders to enumerate");
  GibbsReport r;
  r.L = L;
  r.pressure_used = pressure;
  double worst = 0.0;
  for (int n = 1; n <= L; ++n) {
    std::vector<int> w(static_cast<std::size_t>(n + 1), 0);
    double worst_n = 0.0, sum_n = 0.0;
    long count_n = 0;
    while (true) {
      const double mass = nu.cylinder(std::span<const int>(w).first(static_cast<std::size_t>(n)));
      const double bs = phi.block() && phi.block()->first >= 0
                            ? [&] {
                                const auto* b = phi.block();
                                std::vector<int> buf(static_cast<std::size_t>(b->length));
                                double s = 0.0;
                                for (int k = 0; k < n; ++k) {
                                  for (int i = 0; i < b->length; ++i)
                                    buf[static_cast<std::size_t>(i)] =
                                        w[static_cast<std::size_t>(std::min(k + b->first + i, n))];
                                  s += b->fn(buf);
                                }
                                return s;
                              }()
                            : [&] {
                                const Sequence a = Sequence::windowed(Word{w, 0});
                                double s = 0.0;
                                for (int k = 0; k < n; ++k) s += phi(a.shifted(k));
                                return s;
                              }();
      if (std::isfinite(bs)) {
        if (mass <= 0.0) {
          r.C0_observed = kInf;
          r.diagnostic = "zero-mass cylinder with finite weight";
          worst_n = kInf;
        } else {
          const double e = std::log(mass) - (bs - n * pressure);
          worst_n = std::max(worst_n, std::abs(e));
          sum_n += e;
          ++count_n;
        }
      }
      int i = n;
      while (i >= 0 && ++w[static_cast<std::size_t>(i)] == N) w[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
    }
    r.max_log_ratio.push_back(worst_n);
    r.mean_log_ratio.push_back(count_n ? sum_n / count_n : 0.0);
    worst = std::max(worst, worst_n);
  }
  if (std::isfinite(worst)) r.C0_observed = std::exp(worst);
  if (L >= 3) {
    std::vector<double> xs, ys, ms;
    for (int n = 2; n <= L; ++n) {
      xs.push_back(n);
      ys.push_back(r.max_log_ratio[static_cast<std::size_t>(n - 1)]);
      ms.push_back(r.mean_log_ratio[static_cast<std::size_t>(n - 1)]);
    }
    r.growth_slope = ls_slope(xs, ys);
    r.drift_slope = ls_slope(xs, ms);
    r.growth_flag = r.growth_slope > kGibbsGrowthFlag;
    if (r.growth_flag && r.diagnostic.empty()) r.diagnostic = "Gibbs ratio grows with cylinder length";
  }
  return r;
}

struct VariationalEntry {
  double entropy, integral, free_energy, excess;
};

struct VariationalReport {
  double pressure = 0.0;
  std::vector<VariationalEntry> entries;
  bool all_below = true;  // h + int Phi <= P + tol for every candidate
  double max_excess = kNegInf;

  json to_json() const {
    json e = json::array();
    for (const auto& x : entries)
      e.push_back({{"entropy", num(x.entropy)}, {"integral", num(x.integral)}, {"free_energy", num(x.free_energy)},
                   {"excess", num(x.excess)}});
    return json{{"pressure", num(pressure)}, {"candidates", e}, {"all_below", all_below},
                {"max_excess", num(max_excess)}};
  }
};

inline VariationalReport verify_variational(const Potential& phi, const std::vector<MarkovMeasure>& candidates,
                                            double pressure, double tol = 1e-9) {
  VariationalReport r;
  r.pressure = pressure;
  for (const auto& nu : candidates) {
    const double h = nu.entropy();
    const double I = nu.integral(phi);
    const double f = h + I;
    r.entries.push_back({h, I, f, f - pressure});
    r.max_excess = std::max(r.max_excess, f - pressure);
    if (f > pressure + tol) r.all_below = false;
  }
  return r;
}

}  // namespace tower_thermo
