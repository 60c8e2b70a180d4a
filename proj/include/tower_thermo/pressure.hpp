#pragma once

// Gurevich pressure of one-sided potentials on truncated full shifts.
//
//   periodic: Z_n(b) = sum over period-n words w with w_0 = b of
//             exp(Phi_n(w)) * prod_k m_{w_k}
//   spectral: log of the Perron root of M[a][b] = m_b exp(Phi^(a, b)),
//             Phi^ the two-block collapse of Phi.
//
// Symbol multiplicities m let one symbol stand for a class of m equivalent
// symbols (same potential values, same transitions).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tower_thermo/shift.hpp"
#include "tower_thermo/util.hpp"

namespace tower_thermo {

struct PressureOptions {
  std::vector<double> multiplicity;  // empty: all ones
  unsigned threads = 0;              // 0: thread_count()
  double tol = 1e-12;
  long max_iterations = 100000;
  double budget = 1e9;  // words enumerated per length
};

struct PressureReport {
  double estimate = 0.0;
  std::string method;
  int n_used = 0;  // largest period, or power iterations
  int truncation = 0;
  int base_symbol = -1;
  double convergence_gap = 0.0;
  double collapse_error = 0.0;
  std::vector<int> ladder_n;
  std::vector<double> ladder;      // log Z_n - log Z_{n-1}
  std::vector<double> raw_ladder;  // (1/n) log Z_n

  json to_json() const {
    json j{{"estimate", num(estimate)},
           {"method", method},
           {"n_used", n_used},
           {"truncation", truncation},
           {"base_symbol", base_symbol >= 0 ? json(base_symbol) : json(nullptr)},
           {"convergence_gap", num(convergence_gap)}};
    json d{{"collapse_error", num(collapse_error)}};
    if (!ladder_n.empty()) {
      d["ladder_n"] = ladder_n;
      d["ratio_ladder"] = num_array(ladder);
      d["root_ladder"] = num_array(raw_ladder);
    }
    j["diagnostics"] = d;
    return j;
  }
};

namespace detail {

inline std::vector<double> log_multiplicity(const PressureOptions& o, int N) {
  std::vector<double> lm(static_cast<std::size_t>(N), 0.0);
  if (o.multiplicity.empty()) return lm;
  TT_REQUIRE(static_cast<int>(o.multiplicity.size()) >= N, InvalidInput, "multiplicity vector shorter than truncation");
  for (int a = 0; a < N; ++a) {
    const double m = o.multiplicity[static_cast<std::size_t>(a)];
    TT_REQUIRE(m >= 0.0 && std::isfinite(m), InvalidInput, "multiplicities must be finite and >= 0");
    lm[static_cast<std::size_t>(a)] = m > 0 ? std::log(m) : kNegInf;
  }
  return lm;
}

// log Z_n restricted to words w_0 = b, w_1 = c (c < 0: n == 1).
class PeriodicEnumerator {
 public:
  PeriodicEnumerator(const Potential& phi, int N, std::vector<double> logm)
      : phi_(phi), N_(N), logm_(std::move(logm)) {
    const auto* blk = phi.block();
    if (blk && blk->first >= 0) {
      fast_ = true;
      first_ = blk->first;
      len_ = blk->length;
      fn_ = blk->fn;
    }
  }

  double branch(int b, int c, int n) const {
    std::vector<int> w(static_cast<std::size_t>(n), 0);
    w[0] = b;
    if (n == 1) return leaf(w, n, 0.0);
    w[1] = c;
    LogSum acc;
    double partial = 0.0;
    if (fast_)
      for (int pos = 0; pos < 2; ++pos) partial += interior_term(w, pos, n);
    dfs(w, 2, n, partial, acc);
    return acc.value();
  }

 private:
  // Block term k whose window ends at position pos, if it does not wrap.
  double interior_term(const std::vector<int>& w, int pos, int n) const {
    const int k = pos - first_ - len_ + 1;
    if (k < 0 || k >= n) return 0.0;
    return fn_(std::span<const int>(w).subspan(static_cast<std::size_t>(k + first_), static_cast<std::size_t>(len_)));
  }

  void dfs(std::vector<int>& w, int pos, int n, double partial, LogSum& acc) const {
    if (pos == n) {
      acc.add(leaf(w, n, partial));
      return;
    }
    for (int s = 0; s < N_; ++s) {
      if (logm_[static_cast<std::size_t>(s)] == kNegInf) continue;
      w[static_cast<std::size_t>(pos)] = s;
      dfs(w, pos + 1, n, fast_ ? partial + interior_term(w, pos, n) : 0.0, acc);
    }
  }

  double leaf(const std::vector<int>& w, int n, double partial) const {
    double lm = 0.0;
    for (int s : w) lm += logm_[static_cast<std::size_t>(s)];
    if (lm == kNegInf) return kNegInf;
    double sum = 0.0;
    if (fast_) {
      thread_local std::vector<int> buf;
      buf.resize(static_cast<std::size_t>(len_));
      sum = partial;
      for (int k = std::max(0, n - first_ - len_ + 1); k < n; ++k) {
        for (int i = 0; i < len_; ++i) buf[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>((k + first_ + i) % n)];
        sum += fn_(buf);
      }
    } else {
      sum = phi_.periodic_sum(w, n);
    }
    return sum + lm;
  }

  const Potential& phi_;
  int N_;
  std::vector<double> logm_;
  bool fast_ = false;
  int first_ = 0, len_ = 1;
  std::function<double(std::span<const int>)> fn_;
};

}  // namespace detail

// log Z_n(b) for a single n.
inline double log_periodic_sum(const Potential& phi, int b, int n, int N, const PressureOptions& opt = {}) {
  TT_REQUIRE(n >= 1, InvalidInput, "period must be >= 1");
  TT_REQUIRE(N >= 1 && N <= phi.alphabet_size(), InvalidInput, "truncation outside alphabet");
  TT_REQUIRE(b >= 0 && b < N, InvalidInput, "base symbol outside truncation");
  TT_REQUIRE(std::pow(static_cast<double>(N), n - 1) <= opt.budget, ResourceError,
             "periodic enumeration budget exceeded (N^(n-1) words)");
  detail::PeriodicEnumerator en(phi, N, detail::log_multiplicity(opt, N));
  if (n == 1) return en.branch(b, -1, 1);
  std::vector<double> parts(static_cast<std::size_t>(N), kNegInf);
  const unsigned threads = opt.threads ? opt.threads : thread_count();
  parallel_for(static_cast<std::size_t>(N), n >= 8 ? threads : 1u,
               [&](std::size_t c) { parts[c] = en.branch(b, static_cast<int>(c), n); });
  return log_sum_exp(parts);
}

// Ladder n = 2..n_max; the headline estimate is log Z_n - log Z_{n-1} at n_max.
inline PressureReport pressure_periodic(const Potential& phi, int b, int n_max, int N = 0,
                                        const PressureOptions& opt = {}) {
  if (N == 0) N = phi.alphabet_size();
  TT_REQUIRE(phi.one_sided(), PreconditionError, "pressure_periodic needs a one-sided potential");
  TT_REQUIRE(n_max >= 3, InvalidInput, "n_max must be >= 3");
  PressureReport r;
  r.method = "periodic_orbits";
  r.truncation = N;
  r.base_symbol = b;
  r.n_used = n_max;
  double prev = log_periodic_sum(phi, b, 1, N, opt);
  for (int n = 2; n <= n_max; ++n) {
    const double cur = log_periodic_sum(phi, b, n, N, opt);
    r.ladder_n.push_back(n);
    r.ladder.push_back(cur - prev);
    r.raw_ladder.push_back(cur / n);
    prev = cur;
  }
  r.estimate = r.ladder.back();
  r.convergence_gap = std::abs(r.ladder.back() - r.ladder[r.ladder.size() - 2]);
  if (!std::isfinite(r.estimate))
    throw NumericalError("periodic sums vanish; base symbol has no return words");
  return r;
}

// Row-major N x N matrix with M[a][b] = m_b exp(Phi^(a, b)).
struct TransferMatrix {
  int N = 0;
  std::vector<double> log_entries;  // Phi^(a, b) + log m_b
  std::vector<double> phi_hat;      // Phi^(a, b)
  double collapse_error = 0.0;
  double shift = 0.0;  // max log entry; entries are stored scaled by exp(-shift)

  double log_at(int a, int b) const { return log_entries[static_cast<std::size_t>(a * N + b)]; }
  double hat(int a, int b) const { return phi_hat[static_cast<std::size_t>(a * N + b)]; }
};

// Two-block collapse: Phi^(a, b) is the mean of Phi over length-`depth`
// extensions of [a b] (ends repeated outward).
inline TransferMatrix transfer_matrix(const Potential& phi, int N, int depth, const PressureOptions& opt = {}) {
  TT_REQUIRE(N >= 1 && N <= phi.alphabet_size(), InvalidInput, "truncation outside alphabet");
  TT_REQUIRE(depth >= 2, InvalidInput, "collapse depth must be >= 2");
  TT_REQUIRE(phi.one_sided(), PreconditionError, "transfer matrix needs a one-sided potential");
  TransferMatrix T;
  T.N = N;
  T.phi_hat.assign(static_cast<std::size_t>(N * N), 0.0);
  const auto* blk = phi.block();
  const bool exact = blk && blk->first + blk->length <= 2;
  if (exact) depth = 2;
  T.collapse_error = exact ? 0.0 : phi.variation(2);
  const int extra = depth - 2;
  TT_REQUIRE(std::pow(static_cast<double>(N), depth) <= 4e6, ResourceError, "collapse enumeration too large");
  std::vector<int> w(static_cast<std::size_t>(depth), 0);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      w[0] = a;
      w[1] = b;
      double s = 0.0;
      long count = 0;
      std::fill(w.begin() + 2, w.end(), 0);
      while (true) {
        s += phi(Sequence::windowed(Word{w, 0}));
        ++count;
        int i = depth - 1;
        while (i >= 2 && ++w[static_cast<std::size_t>(i)] == N) w[static_cast<std::size_t>(i--)] = 0;
        if (i < 2 || extra == 0) break;
      }
      T.phi_hat[static_cast<std::size_t>(a * N + b)] = s / static_cast<double>(count);
    }
  const auto lm = detail::log_multiplicity(opt, N);
  T.log_entries.resize(T.phi_hat.size());
  T.shift = kNegInf;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      const double v = T.phi_hat[static_cast<std::size_t>(a * N + b)] + lm[static_cast<std::size_t>(b)];
      T.log_entries[static_cast<std::size_t>(a * N + b)] = v;
      T.shift = std::max(T.shift, v);
    }
  TT_REQUIRE(std::isfinite(T.shift), InvalidInput, "transfer matrix has no positive entries");
  return T;
}

struct PerronData {
  double log_rho = 0.0;
  std::vector<double> right;  // M h = rho h, max-normalized
  std::vector<double> left;   // l M = rho l, normalized so that l . h = 1
  long iterations = 0;
  double final_delta = 0.0;
};

namespace detail {

// Power iteration from the all-ones vector; returns the sup-normalized vector.
inline std::vector<double> power_iterate(const TransferMatrix& T, bool transpose, const PressureOptions& opt,
                                         double& rho, long& iters, double& delta) {
  const int N = T.N;
  std::vector<double> E(static_cast<std::size_t>(N * N));
  for (std::size_t i = 0; i < E.size(); ++i) E[i] = std::exp(T.log_entries[i] - T.shift);
  std::vector<double> v(static_cast<std::size_t>(N), 1.0), w(static_cast<std::size_t>(N));
  double prev_rho = -1.0;
  for (long it = 1; it <= opt.max_iterations; ++it) {
    for (int a = 0; a < N; ++a) {
      double s = 0.0;
      for (int b = 0; b < N; ++b)
        s += (transpose ? E[static_cast<std::size_t>(b * N + a)] : E[static_cast<std::size_t>(a * N + b)]) *
             v[static_cast<std::size_t>(b)];
      w[static_cast<std::size_t>(a)] = s;
    }
    const double nrm = *std::max_element(w.begin(), w.end());
    TT_REQUIRE(nrm > 0.0 && std::isfinite(nrm), NumericalError, "power iteration collapsed to zero");
    double vdelta = 0.0;
    for (int a = 0; a < N; ++a) {
      const double x = w[static_cast<std::size_t>(a)] / nrm;
      vdelta = std::max(vdelta, std::abs(x - v[static_cast<std::size_t>(a)]));
      v[static_cast<std::size_t>(a)] = x;
    }
    rho = nrm;
    delta = std::abs(rho - prev_rho) / rho;
    if (delta <= opt.tol && vdelta <= std::sqrt(opt.tol)) {
      iters = it;
      return v;
    }
    prev_rho = rho;
  }
  throw NumericalError("power iteration did not converge within the iteration limit");
}

}  // namespace detail

inline PerronData perron(const TransferMatrix& T, const PressureOptions& opt = {}) {
  PerronData d;
  double rho_r = 0, rho_l = 0, dl = 0;
  long il = 0;
  d.right = detail::power_iterate(T, false, opt, rho_r, d.iterations, d.final_delta);
  d.left = detail::power_iterate(T, true, opt, rho_l, il, dl);
  d.iterations = std::max(d.iterations, il);
  d.final_delta = std::max(d.final_delta, dl);
  // Rayleigh-type refinement: rho = (l M h) / (l h).
  double num_ = 0.0, den = 0.0;
  for (int a = 0; a < T.N; ++a) {
    den += d.left[static_cast<std::size_t>(a)] * d.right[static_cast<std::size_t>(a)];
    for (int b = 0; b < T.N; ++b)
      num_ += d.left[static_cast<std::size_t>(a)] * std::exp(T.log_at(a, b) - T.shift) * d.right[static_cast<std::size_t>(b)];
  }
  d.log_rho = std::log(num_ / den) + T.shift;
  for (auto& x : d.left) x /= den;
  return d;
}

inline PressureReport pressure_spectral(const Potential& phi, int N = 0, int collapse_depth = 2,
                                        const PressureOptions& opt = {}) {
  if (N == 0) N = phi.alphabet_size();
  PressureReport r;
  if (const auto* b = phi.block(); b && b->first == 0 && b->length == 1) {
    // M[a][b] = m_b exp(f(b)) has rank one: rho = sum_b m_b exp(f(b)).
    TT_REQUIRE(N >= 1 && N <= phi.alphabet_size(), InvalidInput, "truncation outside alphabet");
    const auto lm = detail::log_multiplicity(opt, N);
    LogSum acc;
    for (int a = 0; a < N; ++a) {
      const int sym[1] = {a};
      acc.add(b->fn(sym) + lm[static_cast<std::size_t>(a)]);
    }
    r.method = "spectral_radius";
    r.estimate = acc.value();
    r.n_used = 1;
    r.truncation = N;
    TT_REQUIRE(std::isfinite(r.estimate), InvalidInput, "transfer matrix has no positive entries");
    return r;
  }
  const auto T = transfer_matrix(phi, N, collapse_depth, opt);
  const auto P = perron(T, opt);
  r.method = "spectral_radius";
  r.estimate = P.log_rho;
  r.n_used = static_cast<int>(P.iterations);
  r.truncation = N;
  r.convergence_gap = P.final_delta;
  r.collapse_error = T.collapse_error;
  return r;
}

}  // namespace tower_thermo
