#include <gtest/gtest.h>

#include <cmath>

#include "tower_thermo/liftability.hpp"
#include "tower_thermo/symbolic.hpp"

using namespace tower_thermo;

namespace {

// Word-enumeration oracle: count n-words over N symbols starting with 0, no
// other 0, i.e. first returns of the full shift to [0].
double brute_first_returns(int N, int n) {
  long total = 1;
  for (int i = 1; i < n; ++i) total *= N;
  double c = 0;
  for (long idx = 0; idx < total; ++idx) {
    long x = idx;
    bool ok = true;
    for (int i = 1; i < n; ++i) {
      if (x % N == 0) ok = false;
      x /= N;
    }
    c += ok;
  }
  return c;
}

}  // namespace

TEST(CountProfile, FullTwoShift) {
  auto p = count_profile(first_return_scheme(SFT::full(2), 0, 20, 12));
  for (int n = 1; n <= 20; ++n) {
    EXPECT_EQ(p.S[static_cast<std::size_t>(n - 1)], 1.0);
    EXPECT_EQ(p.S_star[static_cast<std::size_t>(n - 1)], 0.0);
  }
}

TEST(CountProfile, FullThreeShift) {
  auto p = count_profile(first_return_scheme(SFT::full(3), 0, 14, 10));
  for (int n = 1; n <= 14; ++n) {
    EXPECT_EQ(p.S[static_cast<std::size_t>(n - 1)], std::ldexp(1.0, n - 1));
    if (n <= 9) EXPECT_EQ(p.S[static_cast<std::size_t>(n - 1)], brute_first_returns(3, n));
  }
  EXPECT_NEAR(p.h_fit, std::log(2.0), 0.02);
  EXPECT_LT(p.h_fit, std::log(3.0));
}

TEST(CountProfile, SplitAddsUp) {
  auto s = first_return_scheme(SFT::full(3), 0, 8, 8);
  for (std::size_t i = 0; i < s.elements.size(); i += 3) s.elements[i].first_return = false;
  auto p = count_profile(s);
  for (int n = 0; n < p.horizon(); ++n)
    EXPECT_EQ(p.S[static_cast<std::size_t>(n)], p.S_first[static_cast<std::size_t>(n)] + p.S_star[static_cast<std::size_t>(n)]);
}

TEST(CountProfile, ExplicitWordsMatchTransferCounts) {
  const SFT golden({{1, 1}, {1, 0}});
  auto full = first_return_scheme(golden, 1, 12, 12);
  auto counts = first_return_counts(golden, 1, 12);
  auto p = count_profile(full);
  for (int n = 0; n < 12; ++n) EXPECT_EQ(p.S[static_cast<std::size_t>(n)], counts[static_cast<std::size_t>(n)]);
}

TEST(CountProfile, CsvAndJson) {
  auto p = count_profile(first_return_scheme(SFT::full(3), 0, 3, 3));
  EXPECT_EQ(p.to_csv(), "n,S_n,S_first,S_star\n1,1,1,0\n2,2,2,0\n3,4,4,0\n");
  EXPECT_TRUE(p.to_json().contains("h_fit"));
}

TEST(L2, PureFirstReturnPasses) {
  auto p = count_profile(first_return_scheme(SFT::full(3), 0, 12, 6));
  for (double h : {1e-3, 0.5, 2.0}) EXPECT_TRUE(check_L2(p, h).pass);
}

TEST(L2, ExponentialStarCounts) {
  std::vector<double> first(30, 0.0), star;
  for (int n = 1; n <= 30; ++n) star.push_back(std::ldexp(1.0, n - 1));
  auto p = make_profile(first, star);
  auto r = check_L2(p, std::log(2.0));
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.minimal_h, 29.0 / 30.0 * std::log(2.0), 1e-12);
  EXPECT_FALSE(check_L2(p, 0.6).pass);
  EXPECT_FALSE(r.super_exponential);
}

TEST(L2, FactorialFlagged) {
  std::vector<double> first(20, 0.0), star;
  double f = 1;
  for (int n = 1; n <= 20; ++n) star.push_back(f *= n);
  auto p = make_profile(first, star);
  for (double h : {1.0, 5.0, 50.0}) {
    auto r = check_L2(p, h);
    EXPECT_FALSE(r.pass);
    EXPECT_TRUE(r.super_exponential);
  }
}

TEST(Sigma, ValuesAndShape) {
  EXPECT_NEAR(sigma_entropy(0.5), std::log(2.0), 1e-15);
  EXPECT_EQ(sigma_entropy(0.0), 0.0);
  EXPECT_EQ(sigma_entropy(1.0), 0.0);
  EXPECT_NEAR(sigma_entropy(0.25), 0.5623, 1e-4);
  EXPECT_THROW(sigma_entropy(1.5), std::domain_error);
  // concavity and unique maximum on a 1e-3 grid
  const int K = 1000;
  for (int i = 1; i < K; ++i) {
    const double a = sigma_entropy((i - 1) / double(K)), b = sigma_entropy(i / double(K)), c = sigma_entropy((i + 1) / double(K));
    EXPECT_GE(2 * b, a + c - 1e-15);
    if (i != K / 2) EXPECT_LT(b, std::log(2.0));
  }
}

TEST(Binomial, BoundHoldsEverywhere) {
  EXPECT_NEAR(std::log(double(binomial(10, 5))), std::log(252.0), 1e-15);
  EXPECT_NEAR(binomial_bound_check(10, 5).slack, 10 * std::log(2.0) - std::log(252.0), 1e-12);
  EXPECT_EQ(binomial_bound_check(7, 0).slack, 0.0);
  EXPECT_GT(binomial_bound_check(40, 10).slack, 0.0);
  EXPECT_EQ(binomial(60, 30), 118264581564861424ULL);
  for (int n = 0; n <= 60; ++n)
    for (int m = 0; m <= n; ++m) {
      auto b = binomial_bound_check(n, m);
      EXPECT_TRUE(b.holds);
      EXPECT_GE(b.slack, 0.0);
    }
}
