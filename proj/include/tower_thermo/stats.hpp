#pragma once

// Correlation decay and CLT diagnostics: exact correlations on finite Markov
// chains and tower renewal models, orbit estimates with standard errors,
// exponential fits above a noise floor, and a Kolmogorov-Smirnov CLT check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tower_thermo/tower.hpp"
#include "tower_thermo/util.hpp"

namespace tower_thermo {

struct CorrelationSeries {
  std::vector<double> value;   // C_n for n = 0..n_max
  std::vector<double> std_error;  // estimator standard error per lag, 0 when exact
  bool exact = true;
  bool partial = false;        // budget ran out before n_max
  std::string sampler = "exact";
  bool approximate = false;    // the sampler only approximates the target measure
  std::uint64_t seed = 0;

  int n_max() const { return static_cast<int>(value.size()) - 1; }

  std::string to_csv() const {
    std::string s = "lag,value,stderr\n";
    for (std::size_t n = 0; n < value.size(); ++n)
      s += std::to_string(n) + ',' + fmt17(value[n]) + ',' + fmt17(std_error[n]) + '\n';
    return s;
  }
  json to_json() const {
    json j{{"value", num_array(value)}, {"stderr", num_array(std_error)}, {"exact", exact}, {"partial", partial},
           {"sampler", sampler}, {"seed", seed}};
    if (approximate) j["tag"] = "approximate sampler";
    return j;
  }
};

// ---------------------------------------------------------------------------
// Finite Markov chains

inline Eigen::VectorXd chain_stationary(const Eigen::MatrixXd& P) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(P.transpose());
  int best = 0;
  for (int i = 1; i < P.rows(); ++i)
    if (std::abs(es.eigenvalues()[i] - 1.0) < std::abs(es.eigenvalues()[best] - 1.0)) best = i;
  Eigen::VectorXd mu = es.eigenvectors().col(best).real();
  mu /= mu.sum();
  return mu;
}

inline Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& P) {
  const auto n = static_cast<Eigen::Index>(P.size());
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    TT_REQUIRE(P[static_cast<std::size_t>(i)].size() == P.size(), InvalidInput, "chain matrix must be square");
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      M(i, j) = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      TT_REQUIRE(M(i, j) >= 0.0, InvalidInput, "chain entries must be >= 0");
      row += M(i, j);
    }
    TT_REQUIRE(std::abs(row - 1.0) < 1e-10, InvalidInput, "chain rows must sum to 1");
  }
  return M;
}

// Signed covariances Cov(h1(X_n), h2(X_0)) for n = 0..n_max, X stationary.
inline std::vector<double> chain_covariances(const Eigen::MatrixXd& P, const Eigen::VectorXd& h1,
                                             const Eigen::VectorXd& h2, int n_max) {
  const Eigen::VectorXd mu = chain_stationary(P);
  const double m1 = mu.dot(h1), m2 = mu.dot(h2);
  std::vector<double> c;
  Eigen::VectorXd Pn_h1 = h1;
  for (int n = 0; n <= n_max; ++n) {
    c.push_back(mu.cwiseProduct(h2).dot(Pn_h1) - m1 * m2);
    Pn_h1 = P * Pn_h1;
  }
  return c;
}

inline CorrelationSeries chain_correlations(const std::vector<std::vector<double>>& P, const std::vector<double>& h1,
                                            const std::vector<double>& h2, int n_max) {
  const auto M = to_matrix(P);
  TT_REQUIRE(h1.size() == P.size() && h2.size() == P.size(), InvalidInput, "observable length must match the chain");
  const auto c = chain_covariances(M, Eigen::Map<const Eigen::VectorXd>(h1.data(), static_cast<Eigen::Index>(h1.size())),
                                   Eigen::Map<const Eigen::VectorXd>(h2.data(), static_cast<Eigen::Index>(h2.size())),
                                   n_max);
  CorrelationSeries s;
  for (double x : c) s.value.push_back(std::abs(x));
  s.std_error.assign(s.value.size(), 0.0);
  s.sampler = "exact_chain";
  return s;
}

struct SpectralBound {
  double lambda2 = 0.0;  // second largest eigenvalue modulus
  double C = 0.0;        // C_n <= C |lambda2|^n
};

// From the eigendecomposition P = V D V^-1: C_n = |sum_{k>=2} a_k b_k lambda_k^n|
// with a = (mu h2)^T V, b = V^-1 h1, so C = sum_{k>=2} |a_k b_k|.
inline SpectralBound chain_spectral_bound(const std::vector<std::vector<double>>& P, const std::vector<double>& h1,
                                          const std::vector<double>& h2) {
  const auto M = to_matrix(P);
  const Eigen::VectorXd mu = chain_stationary(M);
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  const Eigen::MatrixXcd V = es.eigenvectors();
  const Eigen::MatrixXcd Vi = V.inverse();
  const Eigen::VectorXcd H1 = Eigen::Map<const Eigen::VectorXd>(h1.data(), static_cast<Eigen::Index>(h1.size())).cast<std::complex<double>>();
  const Eigen::VectorXcd W =
      mu.cwiseProduct(Eigen::Map<const Eigen::VectorXd>(h2.data(), static_cast<Eigen::Index>(h2.size()))).cast<std::complex<double>>();
  const Eigen::VectorXcd a = V.transpose() * W, b = Vi * H1;
  int top = 0;
  for (int k = 1; k < M.rows(); ++k)
    if (std::abs(es.eigenvalues()[k] - 1.0) < std::abs(es.eigenvalues()[top] - 1.0)) top = k;
  SpectralBound r;
  for (int k = 0; k < M.rows(); ++k) {
    if (k == top) continue;
    r.lambda2 = std::max(r.lambda2, std::abs(es.eigenvalues()[k]));
    r.C += std::abs(a[k] * b[k]);
  }
  return r;
}

// Asymptotic variance sigma^2 = C_0 + 2 sum_{k>=1} C_k (signed), summed until
// the terms fall below tol.
inline double chain_asymptotic_variance(const std::vector<std::vector<double>>& P, const std::vector<double>& h,
                                        double tol = 1e-15, int max_lags = 1000000) {
  const auto M = to_matrix(P);
  const Eigen::Map<const Eigen::VectorXd> H(h.data(), static_cast<Eigen::Index>(h.size()));
  const Eigen::VectorXd mu = chain_stationary(M);
  const Eigen::VectorXd hc = H.array() - mu.dot(H);
  Eigen::VectorXd Pk = hc;
  double s = mu.dot(hc.cwiseProduct(hc));
  for (int k = 1; k <= max_lags; ++k) {
    Pk = M * Pk;
    const double c = mu.cwiseProduct(hc).dot(Pk);
    s += 2 * c;
    if (std::abs(c) < tol) break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Tower renewal model

// Correlations of the base indicator under the tower map of nu: returns to the
// base form a renewal process with p_n = nu(tau = n), u_0 = 1,
// u_k = sum_n p_n u_{k-n}, and C_k = |u_k / Q - 1 / Q^2|.
inline CorrelationSeries renewal_correlations(const TowerMeasure& nu, int n_max) {
  std::vector<double> p(static_cast<std::size_t>(n_max + 1), 0.0);
  for (std::size_t J = 0; J < nu.weights.size(); ++J)
    if (nu.tau[J] <= n_max) p[static_cast<std::size_t>(nu.tau[J])] += nu.weights[J];
  std::vector<double> u(static_cast<std::size_t>(n_max + 1), 0.0);
  u[0] = 1.0;
  for (int k = 1; k <= n_max; ++k)
    for (int n = 1; n <= k; ++n) u[static_cast<std::size_t>(k)] += p[static_cast<std::size_t>(n)] * u[static_cast<std::size_t>(k - n)];
  CorrelationSeries s;
  for (int k = 0; k <= n_max; ++k) s.value.push_back(std::abs(u[static_cast<std::size_t>(k)] / nu.Q - 1.0 / (nu.Q * nu.Q)));
  s.std_error.assign(s.value.size(), 0.0);
  s.sampler = "tower_renewal";
  s.approximate = true;
  return s;
}

// Gibbs base of the normalized geometric potential -t log J^u F - P_L(t) tau.
inline TowerMeasure geometric_equilibrium_base(const InducingScheme& s, double t, double lo = -10.0, double hi = 10.0) {
  const auto bar = induced_one_block(s, induce_geometric(s, t).value);
  const double PL = solve_PL(bar, s, lo, hi, 1e-12).root;
  return gibbs_base(normalize_potential(bar, s, PL), s);
}

// ---------------------------------------------------------------------------
// Sampled correlations

// Correlations from independent start points: draw(rng) returns a start x,
// step(x) advances it. Both observables are evaluated along n_max steps; the
// standard error comes from the spread over starts.
template <class Point, class Draw, class Step, class H1, class H2>
CorrelationSeries sampled_correlations(Draw&& draw, Step&& step, H1&& h1, H2&& h2, int n_max, long starts,
                                       std::uint64_t seed, long budget = -1) {
  const long usable = budget < 0 ? starts : std::min(starts, budget / std::max(1, n_max));
  TT_REQUIRE(usable >= 2, ResourceError, "budget allows fewer than two start points");
  std::vector<std::vector<double>> a(static_cast<std::size_t>(usable));
  std::vector<double> b(static_cast<std::size_t>(usable));
  parallel_for(static_cast<std::size_t>(usable), thread_count(), [&](std::size_t i) {
    std::seed_seq sq{seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(sq);
    Point x = draw(rng);
    const double y0 = h2(x);
    auto& ai = a[i];
    for (int n = 0; n <= n_max; ++n) {
      ai.push_back(h1(x));
      if (n < n_max) x = step(x);
    }
    b[i] = y0;
  });
  CorrelationSeries s;
  s.exact = false;
  s.sampler = "sampled_starts";
  s.seed = seed;
  s.partial = usable < starts;
  const double m = static_cast<double>(usable);
  double mb = 0.0;
  for (double v : b) mb += v;
  mb /= m;
  for (int n = 0; n <= n_max; ++n) {
    double ma = 0.0;
    for (const auto& v : a) ma += v[static_cast<std::size_t>(n)];
    ma /= m;
    // c_i = (h1_n - mean)(h2_0 - mean) is the per-start covariance sample
    double mc = 0.0, vc = 0.0;
    std::vector<double> c(static_cast<std::size_t>(usable));
    for (std::size_t i = 0; i < c.size(); ++i) {
      c[i] = (a[i][static_cast<std::size_t>(n)] - ma) * (b[i] - mb);
      mc += c[i];
    }
    mc /= m;
    for (double x : c) vc += (x - mc) * (x - mc);
    vc /= (m - 1);
    s.value.push_back(std::abs(mc));
    s.std_error.push_back(std::sqrt(vc / m));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Exponential fit

struct DecayFit {
  double K = 0.0, theta = 0.0, r2 = 0.0;
  int lags_used = 0;
  std::string verdict = "inconclusive";  // "exponential" | "no decay" | "inconclusive"
  json to_json() const {
    return json{{"K", num(K)}, {"theta", num(theta)}, {"r2", num(r2)}, {"lags_used", lags_used}, {"verdict", verdict}};
  }
};

// Least squares of log C_n on n over lags n >= 1 above the noise floor
// (2 x stderr, and a rounding floor for exact series). tail_fraction drops
// that share of the leading usable lags, where subdominant modes still show.
inline DecayFit fit_decay(const CorrelationSeries& s, int min_lags = 8, double exact_floor = 1e-13,
                          double tail_fraction = 0.0) {
  TT_REQUIRE(tail_fraction >= 0.0 && tail_fraction < 1.0, InvalidInput, "tail_fraction must lie in [0, 1)");
  std::vector<double> x, y;
  const double scale = s.value.empty() ? 0.0 : *std::max_element(s.value.begin(), s.value.end());
  for (std::size_t n = 1; n < s.value.size(); ++n) {
    const double floor = std::max(2.0 * s.std_error[n], exact_floor * scale);
    if (s.value[n] > floor && s.value[n] > 0.0) {
      x.push_back(static_cast<double>(n));
      y.push_back(std::log(s.value[n]));
    } else if (s.exact) {
      break;  // exact series below rounding stay there
    }
  }
  const auto drop = static_cast<std::ptrdiff_t>(tail_fraction * static_cast<double>(x.size()));
  x.erase(x.begin(), x.begin() + drop);
  y.erase(y.begin(), y.begin() + drop);
  DecayFit f;
  f.lags_used = static_cast<int>(x.size());
  if (f.lags_used < min_lags) return f;
  double slope = 0.0, icpt = 0.0;
  f.r2 = detail::r_squared(x, y, slope, icpt);
  f.K = std::exp(icpt);
  f.theta = std::exp(slope);
  f.verdict = f.theta < 1.0 ? "exponential" : "no decay";
  return f;
}

// ---------------------------------------------------------------------------
// CLT

struct CLTReport {
  double sigma_hat = 0.0, mean_hat = 0.0;
  double ks_stat = 0.0, threshold = 0.0;
  bool degenerate = false, pass = false;
  int replicas = 0;
  long n = 0;
  std::uint64_t seed = 0;
  json to_json() const {
    return json{{"sigma_hat", num(sigma_hat)}, {"mean_hat", num(mean_hat)}, {"ks_stat", num(ks_stat)},
                {"threshold", num(threshold)}, {"degenerate", degenerate}, {"verdict", pass ? "pass" : "fail"},
                {"replicas", replicas}, {"n", n}, {"seed", seed}};
  }
};

// KS distance of the sample to the normal with its own mean and deviation.
inline double ks_normal(std::vector<double> z, double mean, double sd) {
  std::sort(z.begin(), z.end());
  const double m = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double F = 0.5 * std::erfc(-(z[i] - mean) / (sd * std::sqrt(2.0)));
    d = std::max({d, F - i / m, (i + 1) / m - F});
  }
  return d;
}

// Replicas (1/sqrt n) sum_{i<n} (h(T^i x) - int h); centered_sum(rng, n)
// returns the inner sum for one replica. Threshold c / sqrt(replicas).
template <class CenteredSum>
CLTReport clt_check(CenteredSum&& centered_sum, long n, int replicas, std::uint64_t seed, double c = 1.628,
                    double degenerate_tol = 1e-12) {
  TT_REQUIRE(replicas >= 500, InvalidInput, "clt_check needs at least 500 replicas");
  TT_REQUIRE(n >= 1, InvalidInput, "clt_check needs n >= 1");
  std::vector<double> z(static_cast<std::size_t>(replicas));
  parallel_for(z.size(), thread_count(), [&](std::size_t r) {
    std::seed_seq sq{seed, static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(sq);
    z[r] = centered_sum(rng, n) / std::sqrt(static_cast<double>(n));
  });
  CLTReport rep;
  rep.replicas = replicas;
  rep.n = n;
  rep.seed = seed;
  rep.threshold = c / std::sqrt(static_cast<double>(replicas));
  double m = 0.0;
  for (double x : z) m += x;
  m /= replicas;
  double v = 0.0;
  for (double x : z) v += (x - m) * (x - m);
  rep.mean_hat = m;
  rep.sigma_hat = std::sqrt(v / (replicas - 1));
  if (rep.sigma_hat < degenerate_tol) {
    rep.degenerate = true;
    rep.ks_stat = 0.0;
    rep.pass = false;
    return rep;
  }
  rep.ks_stat = ks_normal(std::move(z), m, rep.sigma_hat);
  rep.pass = rep.ks_stat < rep.threshold;
  return rep;
}

// Centered sum of h along a stationary run of the chain.
inline std::function<double(std::mt19937_64&, long)> chain_centered_sum(const std::vector<std::vector<double>>& P,
                                                                        const std::vector<double>& h) {
  const auto M = to_matrix(P);
  const Eigen::VectorXd mu = chain_stationary(M);
  const double mh = mu.dot(Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size())));
  std::vector<std::vector<double>> cum(P.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    double a = 0.0;
    for (double x : P[i]) cum[i].push_back(a += x);
  }
  std::vector<double> cmu;
  double a = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) cmu.push_back(a += mu[i]);
  auto pick = [](const std::vector<double>& c, double r) {
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(std::upper_bound(c.begin(), c.end(), r * c.back()) - c.begin(),
                                                              static_cast<std::ptrdiff_t>(c.size()) - 1));
  };
  return [=](std::mt19937_64& rng, long n) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::size_t x = pick(cmu, U(rng));
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
      s += h[x] - mh;
      x = pick(cum[x], U(rng));
    }
    return s;
  };
}

}  // namespace tower_thermo
