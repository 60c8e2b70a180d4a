#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tower_thermo/potential_io.hpp"

using namespace tower_thermo;

namespace {

Potential zero_potential(int n) {
  return Potential::block(n, BlockForm{0, 1, [](std::span<const int>) { return 0.0; }}, VariationBound::zero(),
                          json{{"kind", "constant"}});
}

// Phi(a) = sum_k 2^{-|k|} g(a_k), truncated at |k| <= K.
Potential geometric_window(int K) {
  return Potential::general(
      2,
      [K](const Sequence& a) {
        double s = 0.0;
        for (int k = -K; k <= K; ++k) s += std::ldexp(1.0, -std::abs(k)) * a.at(k);
        return s;
      },
      VariationBound::holder(4.0, 0.5), false, json{{"kind", "test_geometric"}});
}

}  // namespace

TEST(Birkhoff, ZeroPotential) {
  EXPECT_EQ(birkhoff_sum(zero_potential(3), PeriodicSequence({0, 2, 1}), 7), 0.0);
}

TEST(Birkhoff, IndicatorOnAlternatingWord) {
  auto ind = Potential::block(2, BlockForm{0, 1, [](std::span<const int> w) { return w[0] == 0 ? 1.0 : 0.0; }},
                              std::nullopt, json{});
  EXPECT_DOUBLE_EQ(birkhoff_sum(ind, PeriodicSequence({0, 1}), 4), 2.0);
}

TEST(Birkhoff, BernoulliMatchesDirectSum) {
  auto phi = potential_from_json(json::parse(R"({"kind":"bernoulli","params":{"p":[0.25,0.75]}})"));
  const double expected = std::log(0.25) + 2.0 * std::log(0.75);
  EXPECT_NEAR(birkhoff_sum(phi, PeriodicSequence({0, 1, 1}), 3), expected, 1e-14);
  EXPECT_NEAR(expected, -1.9617, 1e-4);
}

TEST(Birkhoff, RejectsSymbolOutsideAlphabet) {
  EXPECT_THROW(birkhoff_sum(zero_potential(2), PeriodicSequence({0, 2}), 2), InvalidInput);
}

TEST(Birkhoff, BlockFastPathMatchesGeneralEvaluation) {
  auto phi = potential_from_json(json::parse(R"({"kind":"markov1","params":{"matrix":[[1,2,3],[4,5,6],[7,8,9]]}})"));
  std::vector<int> w{0, 2, 1, 1, 0};
  const Sequence s = Sequence::periodic(w);
  double direct = 0.0;
  for (int k = 0; k < 13; ++k) direct += phi(s.shifted(k));
  EXPECT_NEAR(phi.periodic_sum(w, 13), direct, 1e-12);
}

TEST(Variation, LocalPotentialHasZeroVariationBeyondWindow) {
  auto phi = potential_from_json(json::parse(R"({"kind":"bernoulli","params":{"p":[0.2,0.3,0.5]}})"));
  EXPECT_EQ(estimate_variation(phi, 2, 500), 0.0);
  EXPECT_EQ(estimate_variation(phi, 1, 500), 0.0);
  auto two = potential_from_json(json::parse(R"({"kind":"markov1","params":{"matrix":[[1,2],[3,4]]}})"));
  EXPECT_GT(estimate_variation(two, 1, 500), 0.0);
  EXPECT_EQ(estimate_variation(two, 2, 500), 0.0);
}

TEST(Variation, ConstantHasZeroVariation) {
  auto phi = potential_from_json(json::parse(R"({"kind":"constant","params":{"alphabet":4,"c":3.5}})"));
  for (int n = 1; n <= 4; ++n) EXPECT_EQ(estimate_variation(phi, n, 100), 0.0);
}

TEST(Variation, GeometricWindowBelowTailBound) {
  auto phi = geometric_window(30);
  const double v = estimate_variation(phi, 3, 2000);
  // pairs differ only on |k| >= 3: at most 2 * sum_{k>=3} 2^{-k} = 2^{-1}
  EXPECT_LE(v, 0.5 + 1e-12);
  EXPECT_GT(v, 0.0);
  EXPECT_LE(v, phi.bound()(3) + 1e-12);
}

TEST(Variation, LadderIsNonincreasing) {
  auto phi = geometric_window(30);
  auto ladder = estimate_variation_ladder(phi, 8, 300, 7);
  for (std::size_t i = 1; i < ladder.size(); ++i) EXPECT_LE(ladder[i], ladder[i - 1]);
  for (int n = 1; n <= 8; ++n) EXPECT_LE(ladder[static_cast<std::size_t>(n - 1)], phi.bound()(n) + 1e-12);
}

TEST(Variation, DefaultBlockBoundIsOscillation) {
  auto phi = potential_from_json(json::parse(R"({"kind":"bernoulli","params":{"p":[0.5,0.25]}})"));
  EXPECT_NEAR(phi.bound()(1), std::log(2.0), 1e-15);
  EXPECT_EQ(phi.variation(1), 0.0);
  auto two = potential_from_json(json::parse(R"({"kind":"markov1","params":{"matrix":[[1,2],[3,4]]}})"));
  EXPECT_NEAR(two.variation(1), std::log(4.0), 1e-15);
  EXPECT_EQ(two.variation(2), 0.0);
}

TEST(Cocycle, HoldsForZeroAndForSymbolValue) {
  EXPECT_TRUE(cocycle_check(zero_potential(2), PeriodicSequence({0, 1}), 3, 5));
  auto value = Potential::block(3, BlockForm{0, 1, [](std::span<const int> w) { return double(w[0]); }},
                                std::nullopt, json{});
  EXPECT_TRUE(cocycle_check(value, PeriodicSequence({0, 1, 2}), 2, 4));
}

TEST(Cocycle, RandomHolderPotentialsAndOrbits) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int N = 2 + trial % 3;
    std::vector<double> coeff(9);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& c : coeff) c = g(rng);
    auto phi = Potential::general(
        N,
        [coeff](const Sequence& a) {
          double s = 0.0;
          for (int k = -4; k <= 4; ++k) s += coeff[static_cast<std::size_t>(k + 4)] * std::pow(0.5, std::abs(k)) * a.at(k);
          return s;
        },
        VariationBound::holder(8.0, 0.5), false, json{});
    auto word = detail::random_symbols(1 + rng() % 9, N, rng);
    EXPECT_TRUE(cocycle_check(phi, PeriodicSequence(word), 1 + int(rng() % 7), 1 + int(rng() % 7)));
  }
}

TEST(Cylinders, NestingOnEnumeratedWords) {
  // Every sequence whose window matches an extension w' of w also matches w.
  const int N = 3;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto w = detail::random_symbols(1 + rng() % 4, N, rng);
    const long anchor = static_cast<long>(rng() % 5) - 2;
    auto ext = w;
    auto more = detail::random_symbols(rng() % 3, N, rng);
    ext.insert(ext.end(), more.begin(), more.end());
    auto pre = detail::random_symbols(rng() % 3, N, rng);
    ext.insert(ext.begin(), pre.begin(), pre.end());
    const Word wp{ext, anchor - static_cast<long>(pre.size())};
    const Sequence s = Sequence::windowed(wp);
    const Word wd{w, anchor};
    for (long k = wd.first(); k <= wd.last(); ++k) EXPECT_EQ(s.at(k), wd.at(k));
  }
}

TEST(Sequence, ShiftAndPastReplacement) {
  const Sequence s = Sequence::windowed(Word{{1, 2, 0, 1}, -2});
  EXPECT_EQ(s.at(-2), 1);
  EXPECT_EQ(s.at(-5), 1);
  EXPECT_EQ(s.at(7), 1);
  EXPECT_EQ(s.shifted(1).at(-2), 2);
  const Sequence r = s.with_past(ReferenceFill{{2, 0}});
  EXPECT_EQ(r.at(-1), 2);
  EXPECT_EQ(r.at(-2), 0);
  EXPECT_EQ(r.at(-9), 0);
  EXPECT_EQ(r.at(0), 0);
  EXPECT_EQ(r.shifted(1).at(-1), 0);
  EXPECT_EQ(r.shifted(1).at(-2), 2);
}

TEST(PotentialIO, RejectsUnknownKeysAndKinds) {
  EXPECT_THROW(potential_from_json(json::parse(R"({"kind":"bernoulli","params":{"p":[1]},"extra":1})")), InvalidInput);
  EXPECT_THROW(potential_from_json(json::parse(R"({"kind":"bernoulli","params":{"q":[1]}})")), InvalidInput);
  EXPECT_THROW(potential_from_json(json::parse(R"({"kind":"nope"})")), InvalidInput);
  EXPECT_THROW(VariationBound::table({0.1, 0.2}), InvalidInput);
  EXPECT_THROW(VariationBound::holder(1.0, 1.5), InvalidInput);
}

TEST(PotentialIO, HolderAndTabulated) {
  auto phi = potential_from_json(json::parse(
      R"({"kind":"tabulated","params":{"alphabet":2,"first":-1,"length":2,"values":[0,1,2,3]},"holder":{"C":2,"r":0.5}})"));
  const Sequence s = Sequence::periodic({1, 0});
  // a_{-1} = 0, a_0 = 1 -> index 1
  EXPECT_EQ(phi(s), 1.0);
  EXPECT_EQ(phi.bound().kind(), VariationBound::Kind::Holder);
  EXPECT_FALSE(phi.one_sided());
}

TEST(VariationBound, TailSums) {
  EXPECT_NEAR(VariationBound::holder(1.0, 0.5).tail_sum(32), std::ldexp(1.0, -31), 1e-25);
  EXPECT_TRUE(std::isinf(VariationBound::table({1.0, 0.5}).tail_sum(1)));
  EXPECT_NEAR(VariationBound::table({1.0, 0.5}, 0.5).tail_sum(1), 2.0, 1e-15);
  EXPECT_TRUE(VariationBound::table({1.0, 0.5}, 0.5).heuristic_tail());
}
