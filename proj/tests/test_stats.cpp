#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tower_thermo/katok.hpp"
#include "tower_thermo/stats.hpp"

using namespace tower_thermo;

namespace {

const std::vector<std::vector<double>> kTwo{{0.9, 0.1}, {0.2, 0.8}};

std::vector<std::vector<double>> random_chain(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.05, 1.0);
  std::vector<std::vector<double>> P(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
  for (auto& row : P) {
    double s = 0.0;
    for (auto& x : row) s += x = U(rng);
    for (auto& x : row) x /= s;
  }
  return P;
}

}  // namespace

TEST(Correlations, IidIsZeroBeyondLagZero) {
  auto s = chain_correlations({{0.3, 0.7}, {0.3, 0.7}}, {1, 0}, {1, 0}, 10);
  EXPECT_NEAR(s.value[0], 0.21, 1e-15);
  for (int n = 1; n <= 10; ++n) EXPECT_LT(s.value[static_cast<std::size_t>(n)], 1e-15);
  EXPECT_EQ(fit_decay(s).verdict, "inconclusive");
}

TEST(Correlations, TwoStateChainClosedForm) {
  auto s = chain_correlations(kTwo, {1, 0}, {1, 0}, 40);
  // mu = (2/3, 1/3), Var = 2/9, C_n = (2/9) 0.7^n
  for (int n = 0; n <= 40; ++n) EXPECT_NEAR(s.value[static_cast<std::size_t>(n)], 2.0 / 9 * std::pow(0.7, n), 1e-14);
  auto f = fit_decay(s);
  EXPECT_EQ(f.verdict, "exponential");
  EXPECT_NEAR(f.theta, 0.7, 0.02 * 0.7);
  EXPECT_NEAR(f.K, 2.0 / 9, 1e-8);
  EXPECT_GT(f.r2, 0.999);
}

TEST(Correlations, SpectralBoundHolds) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    auto P = random_chain(n, rng);
    std::vector<double> h1(static_cast<std::size_t>(n)), h2(h1.size());
    for (auto& x : h1) x = U(rng);
    for (auto& x : h2) x = U(rng);
    auto b = chain_spectral_bound(P, h1, h2);
    auto s = chain_correlations(P, h1, h2, 30);
    for (int k = 0; k <= 30; ++k)
      EXPECT_LE(s.value[static_cast<std::size_t>(k)], b.C * std::pow(b.lambda2, k) * (1 + 1e-9) + 1e-15);
  }
  auto b = chain_spectral_bound(kTwo, {1, 0}, {1, 0});
  EXPECT_NEAR(b.lambda2, 0.7, 1e-12);
  EXPECT_NEAR(b.C, 2.0 / 9, 1e-12);
}

TEST(Correlations, CsvAndJson) {
  auto s = chain_correlations(kTwo, {1, 0}, {1, 0}, 1);
  EXPECT_EQ(s.to_csv(), "lag,value,stderr\n0," + fmt17(s.value[0]) + ",0\n1," + fmt17(s.value[1]) + ",0\n");
  s.seed = 42;
  EXPECT_EQ(s.to_json()["seed"], 42);
}

TEST(FitDecay, PlantedGeometric) {
  CorrelationSeries s;
  for (int n = 0; n <= 30; ++n) s.value.push_back(3 * std::pow(0.5, n));
  s.std_error.assign(s.value.size(), 0.0);
  auto f = fit_decay(s);
  EXPECT_NEAR(f.K, 3.0, 1e-10);
  EXPECT_NEAR(f.theta, 0.5, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(FitDecay, WhiteNoiseIsInconclusive) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1e-3);
  CorrelationSeries s;
  s.exact = false;
  s.value.push_back(1.0);
  s.std_error.push_back(1e-3);
  for (int n = 1; n <= 40; ++n) {
    s.value.push_back(std::abs(N(rng)));
    s.std_error.push_back(1e-3);
  }
  EXPECT_EQ(fit_decay(s).verdict, "inconclusive");
}

TEST(FitDecay, TailFractionSkipsSubdominantMode) {
  CorrelationSeries s;
  for (int n = 0; n <= 60; ++n) s.value.push_back(std::pow(0.6, n) + 3.0 * std::pow(0.45, n));
  s.std_error.assign(s.value.size(), 0.0);
  const double full = fit_decay(s).theta, tail = fit_decay(s, 8, 1e-13, 0.5).theta;
  EXPECT_GT(std::abs(full - 0.6), std::abs(tail - 0.6));
  EXPECT_NEAR(tail, 0.6, 2e-3);
  EXPECT_THROW(fit_decay(s, 8, 1e-13, 1.0), InvalidInput);
}

TEST(FitDecay, TooFewLags) {
  CorrelationSeries s;
  for (int n = 0; n <= 5; ++n) s.value.push_back(std::pow(0.5, n));
  s.std_error.assign(s.value.size(), 0.0);
  EXPECT_EQ(fit_decay(s).verdict, "inconclusive");
}

TEST(SampledCorrelations, ChainEstimateWithinErrors) {
  auto draw = [](std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0, 1)(rng) < 2.0 / 3 ? 0 : 1; };
  // the state carries its own random stream
  struct S {
    int x;
    std::uint64_t key;
  };
  auto draw2 = [&](std::mt19937_64& rng) { return S{draw(rng), rng()}; };
  auto step = [](S s) {
    std::minstd_rand r(static_cast<std::uint_fast32_t>(s.key % 2147483646 + 1));
    const double u = std::uniform_real_distribution<double>(0, 1)(r);
    const int nx = s.x == 0 ? (u < 0.9 ? 0 : 1) : (u < 0.2 ? 0 : 1);
    return S{nx, (static_cast<std::uint64_t>(r()) << 31) ^ r()};
  };
  auto h = [](S s) { return s.x == 0 ? 1.0 : 0.0; };
  auto c = sampled_correlations<S>(draw2, step, h, h, 10, 40000, 7);
  auto exact = chain_correlations(kTwo, {1, 0}, {1, 0}, 10);
  for (int n = 0; n <= 10; ++n)
    EXPECT_NEAR(c.value[static_cast<std::size_t>(n)], exact.value[static_cast<std::size_t>(n)],
                5 * c.std_error[static_cast<std::size_t>(n)] + 1e-4);
  EXPECT_EQ(c.seed, 7u);
}

TEST(SampledCorrelations, BudgetMarksPartial) {
  auto draw = [](std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0, 1)(rng); };
  auto step = [](double x) { return std::fmod(2 * x, 1.0); };
  auto h = [](double x) { return x; };
  auto c = sampled_correlations<double>(draw, step, h, h, 5, 1000, 1, 500);
  EXPECT_TRUE(c.partial);
  EXPECT_THROW(sampled_correlations<double>(draw, step, h, h, 5, 1000, 1, 5), ResourceError);
}

TEST(Renewal, GeometricReturnTimes) {
  // tau = 1, 2 with weights 1/2: u_k = 2/3 + (1/3)(-1/2)^k, Q = 3/2
  TowerMeasure nu({0.5, 0.5}, {1, 2});
  auto s = renewal_correlations(nu, 20);
  for (int k = 0; k <= 20; ++k) {
    const double u = 2.0 / 3 + std::pow(-0.5, k) / 3;
    EXPECT_NEAR(s.value[static_cast<std::size_t>(k)], std::abs(u / 1.5 - 1 / 2.25), 1e-15);
  }
  EXPECT_NEAR(fit_decay(s).theta, 0.5, 1e-9);
  EXPECT_TRUE(s.approximate);
}

TEST(Renewal, TowerMatrixOracle) {
  // same quantity from the tower transition matrix of a Bernoulli base
  std::vector<double> w{0.2, 0.5, 0.3};
  std::vector<int> tau{1, 2, 4};
  TowerMeasure nu(w, tau);
  FiniteTowerModel m;
  m.tau = tau;
  m.P.assign(3, w);
  m.phi.assign(3, {});
  const auto T = m.tower_matrix();
  const auto off = m.offsets();
  std::vector<std::vector<double>> P(static_cast<std::size_t>(T.rows()));
  for (int i = 0; i < T.rows(); ++i)
    for (int j = 0; j < T.cols(); ++j) P[static_cast<std::size_t>(i)].push_back(T(i, j));
  std::vector<double> base(static_cast<std::size_t>(T.rows()), 0.0);
  for (int o : off) base[static_cast<std::size_t>(o)] = 1.0;
  auto exact = chain_correlations(P, base, base, 25);
  auto s = renewal_correlations(nu, 25);
  for (int k = 0; k <= 25; ++k) EXPECT_NEAR(s.value[static_cast<std::size_t>(k)], exact.value[static_cast<std::size_t>(k)], 1e-12);
}

TEST(CLT, ConstantIsDegenerate) {
  auto r = clt_check([](std::mt19937_64&, long) { return 0.0; }, 100, 500, 1);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.sigma_hat, 0.0);
}

TEST(CLT, IidSignsPassOnSeeds) {
  auto signs = [](std::mt19937_64& rng, long n) {
    std::bernoulli_distribution B(0.5);
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += B(rng) ? 1.0 : -1.0;
    return s;
  };
  int pass = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto r = clt_check(signs, 1000, 500, seed);
    EXPECT_NEAR(r.sigma_hat, 1.0, 0.1);
    pass += r.pass;
  }
  EXPECT_GE(pass, 19);
}

TEST(CLT, MarkovChainGreenKubo) {
  const double s2 = chain_asymptotic_variance(kTwo, {1, 0});
  EXPECT_NEAR(s2, 2.0 / 9 * (1 + 2 * 0.7 / 0.3), 1e-12);
  auto r = clt_check(chain_centered_sum(kTwo, {1, 0}), 2000, 1000, 3);
  EXPECT_NEAR(r.sigma_hat * r.sigma_hat, s2, 0.1 * s2);
  EXPECT_TRUE(r.pass);
}

TEST(CLT, Validation) {
  EXPECT_THROW(clt_check([](std::mt19937_64&, long) { return 0.0; }, 10, 100, 1), InvalidInput);
}

TEST(KatokDecay, HalfTemperatureRenewal) {
  const KatokAdapter A(KatokMap(SlowdownParams{}), MarkovPartition::standard(), kCatBaseSymbol);
  GridSchemeOptions o;
  o.nx = o.ny = 80;
  const auto s = katok_first_return_scheme(A, o);
  auto nu = geometric_equilibrium_base(s, 0.5);
  auto c = renewal_correlations(nu, 60);
  auto f = fit_decay(c);
  EXPECT_EQ(f.verdict, "exponential");
  EXPECT_LT(f.theta, 1.0);
  EXPECT_GE(f.r2, 0.9);
}
