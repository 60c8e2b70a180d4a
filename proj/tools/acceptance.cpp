// Acceptance suite: one PASS/FAIL line per criterion with its measured values
// and runtime. Exit status counts failures not listed with --expect-fail.

#include <CLI11.hpp>

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "tower_thermo/catmap.hpp"
#include "tower_thermo/cohomology.hpp"
#include "tower_thermo/gibbs.hpp"
#include "tower_thermo/katok.hpp"
#include "tower_thermo/liftability.hpp"
#include "tower_thermo/potential_io.hpp"
#include "tower_thermo/pressure.hpp"
#include "tower_thermo/stats.hpp"
#include "tower_thermo/symbolic.hpp"
#include "tower_thermo/tower.hpp"

using namespace tower_thermo;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f(const char* fmt, double x) {
  char b[64];
  std::snprintf(b, sizeof b, fmt, x);
  return b;
}

std::string g(double x) { return f("%.3g", x); }

// ---------------------------------------------------------------------------

Outcome pressure_oracle() {
  const auto zero = potential_from_json(json::parse(R"({"kind":"constant","params":{"alphabet":5,"c":0}})"));
  double worst = 0.0;
  for (int N : {2, 3, 5}) {
    const double a = pressure_periodic(zero, 0, 12, N).estimate;
    const double b = pressure_spectral(zero, N).estimate;
    worst = std::max({worst, std::abs(a - std::log(N)), std::abs(b - std::log(N))});
  }
  return {worst <= 1e-6, "max|P - log N| = " + g(worst) + " (<= 1e-6)"};
}

Outcome cohomology() {
  const std::vector<double> gt{0.3, -1.2, 2.5};
  const auto phi = Potential::general(
      3, [gt](const Sequence& a) { return gt[static_cast<std::size_t>(a.at(-1))]; }, VariationBound::table({3.7, 0.0}),
      false, json{{"kind", "previous_symbol"}});
  const int J = default_truncation(phi);
  const auto psi = reduce_to_one_sided(phi, ReferenceFill{}, J);
  const double tail = bowen_tail(phi, J);
  std::mt19937_64 rng(1);
  double value_err = 0.0;
  for (int t = 0; t < 2000; ++t) {
    const Sequence a = Sequence::windowed(Word{detail::random_symbols(13, 3, rng), -6});
    value_err = std::max(value_err, std::abs(psi(a) - gt[static_cast<std::size_t>(a.at(0))]));
  }
  double birk = 0.0;
  for (int n = 1; n <= 10; ++n) {
    std::vector<int> w(static_cast<std::size_t>(n), 0);
    while (true) {
      birk = std::max(birk, periodic_cohomology_check(phi, psi, PeriodicSequence(w)));
      int i = n - 1;
      while (i >= 0 && ++w[static_cast<std::size_t>(i)] == 3) w[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
    }
  }
  // Phi_n over a period is sum_k g(w_k), so Z_n(Phi) = e^{g(b)} (sum_a e^{g(a)})^{n-1}
  double z = 0.0;
  for (double x : gt) z += std::exp(x);
  const double P_phi = std::log(z);
  const double P_psi_spec = pressure_spectral(psi, 3).estimate;
  const double P_psi_per = pressure_periodic(psi, 0, 12, 3).estimate;
  const double dp = std::max(std::abs(P_psi_spec - P_phi), std::abs(P_psi_per - P_phi));
  const bool ok = value_err <= 1e-12 && birk <= 2.0 * tail + 1e-12 && dp <= 1e-6;
  return {ok, "|Psi - g(a0)| = " + g(value_err) + ", periodic gap " + g(birk) + " (<= 2 x tail " + g(tail) +
                  "), |P(Psi) - P(Phi)| = " + g(dp)};
}

Outcome gibbs() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> d(0.2, 2.0), off(0.05, 0.3);
  bool finite = true;
  double worst_rel = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int N = 2 + k % 3;
    std::vector<std::vector<double>> M(static_cast<std::size_t>(N), std::vector<double>(static_cast<std::size_t>(N)));
    for (auto& row : M)
      for (auto& x : row) x = d(rng);
    const auto phi = potential_from_json(json{{"kind", "markov1"}, {"params", {{"matrix", M}}}});
    const auto gm = gibbs_measure(phi);
    const auto r = verify_gibbs(gm.measure, phi, gm.pressure, 6);
    finite = finite && std::isfinite(r.C0_observed);
    const double delta = off(rng);
    const auto wrong = verify_gibbs(gm.measure, phi, gm.pressure + delta, 6);
    worst_rel = std::max(worst_rel, std::abs(wrong.drift_slope - delta) / delta);
  }
  return {finite && worst_rel <= 0.1,
          std::string("C0 finite on 20 potentials: ") + (finite ? "yes" : "no") + ", planted drift slope rel. error " +
              g(worst_rel) + " (<= 0.1)"};
}

// Stationary law of M by power iteration on the lazy chain.
std::vector<double> stationary_power(const Eigen::MatrixXd& M) {
  const auto n = M.rows();
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < 400000; ++it) {
    Eigen::RowVectorXd w = 0.5 * (v + v * M);
    if ((w - v).cwiseAbs().maxCoeff() < 1e-17) break;
    v = w;
  }
  v /= v.sum();
  return std::vector<double>(v.data(), v.data() + n);
}

Outcome abramov() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    FiniteTowerModel m;
    const int K = 1 + static_cast<int>(rng() % 6);
    m.P.assign(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(K)));
    for (auto& row : m.P) {
      double s = 0;
      for (auto& x : row) s += (x = u(rng));
      for (auto& x : row) x /= s;
    }
    for (int J = 0; J < K; ++J) {
      const int h = 1 + static_cast<int>(rng() % 5);
      m.tau.push_back(h);
      std::vector<double> lev(static_cast<std::size_t>(h));
      for (auto& x : lev) x = nd(rng);
      m.phi.push_back(lev);
    }
    const auto r = abramov_kac_check(m);
    // brute force over the tower chain
    const auto M = m.tower_matrix();
    const auto mu = stationary_power(M);
    const auto off = m.offsets();
    double h = 0.0, I = 0.0;
    for (Eigen::Index x = 0; x < M.rows(); ++x)
      for (Eigen::Index y = 0; y < M.cols(); ++y)
        if (M(x, y) > 0) h -= mu[static_cast<std::size_t>(x)] * M(x, y) * std::log(M(x, y));
    for (std::size_t J = 0; J < m.tau.size(); ++J)
      for (int k = 0; k < m.tau[J]; ++k) I += mu[static_cast<std::size_t>(off[J] + k)] * m.phi[J][static_cast<std::size_t>(k)];
    worst = std::max({worst, r.entropy_residual, r.integral_residual, std::abs(r.h_F - r.Q * h),
                      std::abs(r.int_phibar - r.Q * I)});
  }
  return {worst <= 1e-8, "max residual over 200 models = " + g(worst) + " (<= 1e-8)"};
}

Outcome cat_line() {
  const auto part = MarkovPartition::standard();
  const auto full = cat_first_return_scheme(part, kCatBaseSymbol, 64, 12);
  const auto s = full.classes([](const SchemeElement& e) { return e.log_ju; });
  const double ll = CatMap().log_lambda();
  const auto c = pressure_curve(s, {-0.25, 0.0, 0.25, 0.5, 0.75, 1.0}, -5.0, 5.0);
  double worst = 0.0, p1 = std::numeric_limits<double>::quiet_NaN();
  bool all = true;
  for (const auto& p : c.points) {
    all = all && p.available;
    worst = std::max(worst, std::abs(p.P_L - (1 - p.t) * ll));
    if (p.t == 1.0) p1 = p.P_L;
  }
  return {all && worst <= 2e-3 && s.size() <= 64,
          std::to_string(s.size()) + " elements, max|P_L - (1-t) log lambda| = " + g(worst) + ", P_L(1) = " + g(p1) +
              " (<= 2e-3)"};
}

Outcome liftability() {
  const auto p = count_profile(first_return_scheme(SFT::full(3), 0, 14, 10));
  bool exact = true;
  for (int n = 1; n <= 14; ++n) exact = exact && p.S[static_cast<std::size_t>(n - 1)] == std::ldexp(1.0, n - 1);
  const auto c = count_profile(cat_first_return_scheme(MarkovPartition::standard(), kCatBaseSymbol, 64, 12));
  const double ll = CatMap().log_lambda();
  const bool ok = exact && std::abs(p.h_fit - std::log(2.0)) <= 0.02 && c.h_fit < ll - 0.05;
  return {ok, std::string("S_n = 2^(n-1): ") + (exact ? "yes" : "no") + ", h_fit = " + f("%.5f", p.h_fit) +
                  ", cat h_fit = " + f("%.5f", c.h_fit) + " (< " + f("%.5f", ll - 0.05) + ")"};
}

Outcome katok_sanity() {
  const SlowdownParams p;
  const double deg = degenerate_step_deviation(p, 10000, 20);
  const auto fc = flow_checks(p);
  const KatokMap G(p);
  const InvariantDensity rho(G);
  const auto inv = density_invariance(G, rho, 100);
  const bool ok = deg <= 1e-7 && fc.first_integral <= 1e-8 && fc.liouville <= 1e-6 && inv.max_rel_deviation <= 1e-3;
  return {ok, "degenerate " + g(deg) + ", s1 s2 drift " + g(fc.first_integral) + ", Liouville " + g(fc.liouville) +
                  ", invariance " + g(inv.max_rel_deviation)};
}

Outcome katok_lyapunov() {
  const KatokMap G(SlowdownParams{});
  const auto r = lyapunov_report(G, 1000000, 200, 1);
  const double ll = G.cat().log_lambda();
  const double chi = r.space_average;
  const bool ok = chi >= 0.1 && chi <= ll - 0.01 && std::max(r.time_average, chi) <= ll - 0.01 && r.relative_gap <= 0.02;
  // the printed power law, for reference only
  SlowdownParams printed;
  printed.psi_variant = "as_printed";
  const KatokMap Gp(printed);
  const double chi_p = lyapunov_space_average(Gp, InvariantDensity(Gp), 200);
  return {ok, "space " + f("%.5f", chi) + ", time " + f("%.5f", r.time_average) + ", gap " + g(r.relative_gap) +
                  ", bound [0.1, " + f("%.5f", ll - 0.01) + "]; as_printed psi gives " + f("%.5f", chi_p)};
}

const InducingScheme& katok_scheme() {
  static const InducingScheme s = [] {
    const KatokAdapter A(KatokMap(SlowdownParams{}), MarkovPartition::standard(), kCatBaseSymbol);
    GridSchemeOptions o;
    o.nx = o.ny = 400;
    o.horizon = 30;
    return katok_first_return_scheme(A, o);
  }();
  return s;
}

Outcome katok_endpoints() {
  const auto c = pressure_curve(katok_scheme(), {0.0, 1.0});
  const double ll = CatMap().log_lambda();
  const auto& p0 = c.points[0];
  const auto& p1 = c.points[1];
  const bool ok = p0.available && p1.available && std::abs(p1.P_L) <= 5e-2 && std::abs(p0.P_L - ll) <= 5e-2;
  return {ok, "P_L(0) = " + f("%.6f", p0.P_L) + " (log lambda " + f("%.6f", ll) + "), P_L(1) = " + g(p1.P_L)};
}

Outcome decay_clt() {
  // exact chains: fitted rate against |lambda_2|
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double worst = 0.0;
  std::vector<std::vector<std::vector<double>>> chains{{{0.9, 0.1}, {0.2, 0.8}}};
  // reversible chains (symmetric conductances, real spectrum) with |lambda_3| <= |lambda_2| / 2,
  // so the leading mode dominates while the series is above rounding
  for (int k = 0; chains.size() < 10 && k < 10000; ++k) {
    const int n = 2 + k % 3;
    std::vector<std::vector<double>> P(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b)
        P[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = P[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = u(rng);
    for (auto& row : P) {
      double s = 0.0;
      for (double x : row) s += x;
      for (auto& x : row) x /= s;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_matrix(P));
    std::vector<double> mod;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mod.push_back(std::abs(es.eigenvalues()[i]));
    std::sort(mod.rbegin(), mod.rend());
    if (mod[1] < 0.05 || (mod.size() > 2 && mod[2] > 0.5 * mod[1])) continue;
    chains.push_back(P);
  }
  int rated = 0;
  for (const auto& P : chains) {
    std::vector<double> h(P.size(), 0.0);
    h[0] = 1.0;
    const auto sb = chain_spectral_bound(P, h, h);
    const auto fit = fit_decay(chain_correlations(P, h, h, 400), 8, 1e-13, 0.5);
    worst = std::max(worst, fit.verdict == "exponential" ? std::abs(fit.theta - sb.lambda2) / sb.lambda2 : kInf);
    ++rated;
  }
  // i.i.d. control
  auto signs = [](std::mt19937_64& r, long n) {
    std::bernoulli_distribution B(0.5);
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += B(r) ? 1.0 : -1.0;
    return s;
  };
  int pass = 0;
  const int seeds = 20;
  for (int seed = 1; seed <= seeds; ++seed) pass += clt_check(signs, 1000, 1000, static_cast<std::uint64_t>(seed)).pass;
  // Katok t = 1/2 through the tower renewal model
  const auto kf = fit_decay(renewal_correlations(geometric_equilibrium_base(katok_scheme(), 0.5), 60));
  const bool ok = worst <= 0.02 && pass >= 0.95 * seeds && kf.theta < 1.0 && kf.r2 >= 0.9 && kf.verdict == "exponential";
  return {ok, "chain rate rel. error " + g(worst) + " on " + std::to_string(rated) + " chains" + ", KS pass " + std::to_string(pass) + "/" + std::to_string(seeds) +
                  ", Katok theta " + f("%.4f", kf.theta) + " r2 " + f("%.4f", kf.r2) + " (approximate sampler)"};
}

Outcome stirling() {
  double min_slack = kInf;
  bool holds = true;
  for (int n = 0; n <= 60; ++n)
    for (int m = 0; m <= n; ++m) {
      const auto b = binomial_bound_check(n, m);
      holds = holds && b.holds;
      min_slack = std::min(min_slack, b.slack);
    }
  return {holds && min_slack >= 0.0, "min slack " + g(min_slack) + " over 0 <= m <= n <= 60"};
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> expect_fail, only;
  app.add_option("--expect-fail", expect_fail, "criteria known to fail");
  app.add_option("--only", only, "run these criteria only");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> known(expect_fail.begin(), expect_fail.end()), pick(only.begin(), only.end());

  const std::vector<Criterion> all{{1, "pressure oracle", 5, pressure_oracle},
                                   {2, "cohomology", 10, cohomology},
                                   {3, "Gibbs verification", 30, gibbs},
                                   {4, "Abramov and Kac", 10, abramov},
                                   {5, "cat map pressure line", 120, cat_line},
                                   {6, "liftability counts", 20, liftability},
                                   {7, "Katok construction sanity", 180, katok_sanity},
                                   {8, "Katok Lyapunov gap", 180, katok_lyapunov},
                                   {9, "Katok pressure endpoints", 600, katok_endpoints},
                                   {10, "decay and CLT", 300, decay_clt},
                                   {11, "Stirling bound", 1, stirling}};
  int unexpected = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && dt < c.budget_s;
    std::printf("%s %2d %-26s %s; runtime %.2f s (< %g s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), dt, c.budget_s, !pass && known.count(c.id) ? " [expected]" : "");
    std::fflush(stdout);
    if (!pass && !known.count(c.id)) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
