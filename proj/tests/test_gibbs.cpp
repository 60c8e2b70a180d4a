#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "tower_thermo/gibbs.hpp"
#include "tower_thermo/potential_io.hpp"

using namespace tower_thermo;

namespace {

Potential markov(const std::vector<std::vector<double>>& M) {
  return potential_from_json(json{{"kind", "markov1"}, {"params", {{"matrix", M}}}});
}

std::vector<std::vector<double>> random_positive(int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.2, 2.0);
  std::vector<std::vector<double>> M(static_cast<std::size_t>(N), std::vector<double>(static_cast<std::size_t>(N)));
  for (auto& row : M)
    for (auto& x : row) x = d(rng);
  return M;
}

std::vector<std::vector<int>> all_words(int N, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> w(static_cast<std::size_t>(k), 0);
  while (true) {
    out.push_back(w);
    int i = k - 1;
    while (i >= 0 && ++w[static_cast<std::size_t>(i)] == N) w[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
  }
  return out;
}

}  // namespace

TEST(GibbsMeasure, ZeroPotentialIsUniform) {
  auto phi = potential_from_json(json::parse(R"({"kind":"constant","params":{"alphabet":2,"c":0}})"));
  auto g = gibbs_measure(phi);
  for (int k = 1; k <= 5; ++k)
    for (const auto& w : all_words(2, k)) EXPECT_NEAR(g.measure.cylinder(w), std::ldexp(1.0, -k), 1e-14);
}

TEST(GibbsMeasure, BernoulliIsProductWithUnitConstant) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  auto phi = potential_from_json(json{{"kind", "bernoulli"}, {"params", {{"p", p}}}});
  auto g = gibbs_measure(phi);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(g.measure.pi()[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(a)], 1e-13);
  auto r = verify_gibbs(g.measure, phi, 0.0, 6);
  EXPECT_NEAR(r.C0_observed, 1.0, 1e-12);
}

TEST(GibbsMeasure, TransitionMatchesEigenOracle) {
  auto M = random_positive(3, 4);
  auto g = gibbs_measure(markov(M));
  Eigen::Matrix3d A;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A(i, j) = M[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  Eigen::EigenSolver<Eigen::Matrix3d> es(A);
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (es.eigenvalues()(i).real() > es.eigenvalues()(k).real()) k = i;
  const double rho = es.eigenvalues()(k).real();
  Eigen::Vector3d h = es.eigenvectors().col(k).real();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      EXPECT_NEAR(g.measure.P()[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)],
                  M[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] * h(b) / (rho * h(a)), 1e-12);
  EXPECT_NEAR(g.pressure, std::log(rho), 1e-12);
}

TEST(GibbsMeasure, NormalizedAndShiftInvariant) {
  auto g = gibbs_measure(markov(random_positive(3, 8)));
  for (int k = 1; k <= 6; ++k) {
    double total = 0.0;
    for (const auto& w : all_words(3, k)) {
      total += g.measure.cylinder(w);
      double pre = 0.0;
      for (int a = 0; a < 3; ++a) {
        std::vector<int> aw{a};
        aw.insert(aw.end(), w.begin(), w.end());
        pre += g.measure.cylinder(aw);
      }
      EXPECT_NEAR(pre, g.measure.cylinder(w), 1e-12);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(VerifyGibbs, MarkovConstantBoundedByEigenvectorRatio) {
  auto phi = markov(random_positive(3, 12));
  auto g = gibbs_measure(phi);
  auto r = verify_gibbs(g.measure, phi, g.pressure, 6);
  const auto [hmin, hmax] = std::minmax_element(g.right.begin(), g.right.end());
  double lh = 0.0;
  for (int a = 0; a < 3; ++a) lh = std::max(lh, g.left[static_cast<std::size_t>(a)] * g.right[static_cast<std::size_t>(a)]);
  EXPECT_TRUE(std::isfinite(r.C0_observed));
  EXPECT_GE(r.C0_observed, 1.0);
  // nu[w] = l_{w0} h_{wn}/h... ratio lies within (hmax/hmin) * max(l h)/min(l h) style bounds
  EXPECT_LE(r.C0_observed, (*hmax / *hmin) * (*hmax / *hmin) * 1e3);
  EXPECT_FALSE(r.growth_flag);
  EXPECT_LT(std::abs(r.growth_slope), 1e-9);
}

TEST(VerifyGibbs, WrongPressureIsFlagged) {
  auto phi = markov(random_positive(3, 12));
  auto g = gibbs_measure(phi);
  auto r = verify_gibbs(g.measure, phi, g.pressure + 0.1, 8);
  EXPECT_TRUE(r.growth_flag);
  EXPECT_NEAR(r.growth_slope, 0.1, 1e-9);
  auto ok = verify_gibbs(g.measure, phi, g.pressure, 8);
  EXPECT_NEAR(std::log(r.C0_observed) - std::log(ok.C0_observed), 0.8, 0.5);
}

TEST(VerifyGibbs, DriftRecoversSmallPlantedOffset) {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    auto phi = markov(random_positive(4, seed));
    auto g = gibbs_measure(phi);
    EXPECT_LT(std::abs(verify_gibbs(g.measure, phi, g.pressure, 6).drift_slope), 1e-9);
    EXPECT_NEAR(verify_gibbs(g.measure, phi, g.pressure + 0.03, 6).drift_slope, 0.03, 1e-9);
  }
}

TEST(VerifyGibbs, ZeroMassCylinderIsInfinite) {
  auto phi = potential_from_json(json::parse(R"({"kind":"constant","params":{"alphabet":2,"c":0}})"));
  auto nu = MarkovMeasure::bernoulli({1.0, 0.0});
  auto r = verify_gibbs(nu, phi, std::log(2.0), 3);
  EXPECT_TRUE(std::isinf(r.C0_observed));
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(Variational, ZeroPotentialUniformAttainsLogN) {
  auto phi = potential_from_json(json::parse(R"({"kind":"constant","params":{"alphabet":3,"c":0}})"));
  auto r = verify_variational(phi, {MarkovMeasure::bernoulli({1. / 3, 1. / 3, 1. / 3}), MarkovMeasure::bernoulli({0.5, 0.3, 0.2})},
                              std::log(3.0));
  EXPECT_TRUE(r.all_below);
  EXPECT_NEAR(r.entries[0].free_energy, std::log(3.0), 1e-12);
  EXPECT_LT(r.entries[1].free_energy, std::log(3.0) - 1e-3);
}

TEST(Variational, BernoulliPotential) {
  const std::vector<double> p{0.2, 0.8};
  auto phi = potential_from_json(json{{"kind", "bernoulli"}, {"params", {{"p", p}}}});
  auto r = verify_variational(phi, {MarkovMeasure::bernoulli(p), MarkovMeasure::bernoulli({0.5, 0.5})}, 0.0);
  EXPECT_NEAR(r.entries[0].free_energy, 0.0, 1e-12);
  EXPECT_NEAR(r.entries[1].free_energy, std::log(2.0) + 0.5 * (std::log(0.2) + std::log(0.8)), 1e-12);
  EXPECT_LT(r.entries[1].free_energy, 0.0);
}

TEST(Variational, GibbsAttainsAndPerturbationsLose) {
  auto phi = markov(random_positive(3, 21));
  auto g = gibbs_measure(phi);
  std::vector<MarkovMeasure> cands{g.measure};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  for (int t = 0; t < 20; ++t) {
    auto P = g.measure.P();
    for (auto& row : P) {
      double s = 0;
      for (auto& x : row) s += (x = std::max(1e-6, x + d(rng)));
      for (auto& x : row) x /= s;
    }
    cands.push_back(MarkovMeasure::stationary(P));
  }
  auto r = verify_variational(phi, cands, g.pressure);
  EXPECT_TRUE(r.all_below);
  EXPECT_NEAR(r.entries[0].free_energy, g.pressure, 1e-9);
  for (std::size_t i = 1; i < r.entries.size(); ++i) EXPECT_LT(r.entries[i].excess, -1e-9);
}

TEST(Report, GibbsKeys) {
  auto phi = potential_from_json(json::parse(R"({"kind":"constant","params":{"alphabet":2,"c":0}})"));
  auto j = verify_gibbs(gibbs_measure(phi).measure, phi, std::log(2.0), 3).to_json();
  for (const char* k : {"C0_observed", "L", "pressure_used"}) EXPECT_TRUE(j.contains(k));
}
