#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "tower_thermo/catmap.hpp"
#include "tower_thermo/liftability.hpp"

using namespace tower_thermo;

namespace {

const MarkovPartition& part() {
  static const MarkovPartition p = MarkovPartition::standard();
  return p;
}

const InducingScheme& cat_scheme() {
  static const InducingScheme s = cat_first_return_scheme(part(), kCatBaseSymbol, 64, 12);
  return s;
}

// Translation of the torus: an isometry, nothing contracts.
class TranslationAdapter : public CatMapAdapter {
 public:
  using CatMapAdapter::CatMapAdapter;
  std::string name() const override { return "translation"; }
  Vec2 f(Vec2 x) const override { return wrap(x + Vec2{0.37, 0.11}); }
  Vec2 f_inv(Vec2 x) const override { return wrap(x - Vec2{0.37, 0.11}); }
};

}  // namespace

TEST(CatMap, SelfTest) {
  const CatMap T;
  auto st = T.self_test();
  EXPECT_EQ(json_number(st["det"]), 1.0);
  EXPECT_NEAR(json_number(st["lambda_times_inverse"]), 1.0, 1e-14);
  EXPECT_LT(json_number(st["eigen_residual"]), 1e-14);
  EXPECT_LT(std::abs(json_number(st["orthogonality"])), 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 x{U(rng), U(rng)};
    EXPECT_LT(torus_distance(T.inverse(T.apply(x)), x), 1e-14);
  }
}

TEST(Partition, MarkovSelfTestAndSFT) {
  const auto& P = part();
  EXPECT_EQ(P.size(), 5);
  auto st = P.self_test();
  EXPECT_NEAR(json_number(st["area"]), 1.0, 1e-12);
  EXPECT_LT(json_number(st["u_tiling_gap"]), 1e-9);
  const std::vector<std::vector<int>> expect{
      {1, 1, 1, 0, 0}, {0, 0, 0, 1, 1}, {1, 1, 1, 0, 0}, {0, 0, 0, 1, 1}, {1, 1, 1, 0, 0}};
  EXPECT_EQ(P.sft().B, expect);
  Eigen::MatrixXd B(5, 5);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) B(a, b) = expect[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  EXPECT_NEAR(B.eigenvalues().cwiseAbs().maxCoeff(), CatMap().lambda, 1e-12);
}

TEST(Partition, CoversTorusOnce) {
  const auto& P = part();
  const CatMap T;
  int bad = 0;
  for (int i = 0; i < 97; ++i)
    for (int j = 0; j < 89; ++j) {
      const Vec2 p{(i + 0.31) / 97, (j + 0.77) / 89};
      int hits = 0;
      for (int n1 = -3; n1 <= 3; ++n1)
        for (int n2 = -3; n2 <= 3; ++n2) {
          const Vec2 e = T.to_eigen({p.x + n1, p.y + n2});
          for (int k = 0; k < P.size(); ++k) hits += P.rect(k).contains(e);
        }
      bad += hits != 1;
    }
  EXPECT_EQ(bad, 0);
}

TEST(Partition, RejectsNonMarkovDescriptor) {
  json d = part().to_json();
  d["rectangles"][0]["u"][1] = json_number(d["rectangles"][0]["u"][1]) + 0.01;
  d["rectangles"][1]["u"][0] = json_number(d["rectangles"][1]["u"][0]) + 0.01;
  EXPECT_THROW(MarkovPartition::from_json(d), InvalidInput);
  EXPECT_NO_THROW(MarkovPartition::from_json(part().to_json()));
}

TEST(CatScheme, CountsMatchTransferMatrixAndWords) {
  const auto& s = cat_scheme();
  const auto counts = first_return_counts(part().sft(), kCatBaseSymbol, 64);
  for (int n = 1; n <= 40; ++n) EXPECT_EQ(counts[static_cast<std::size_t>(n - 1)], n == 1 ? 0.0 : std::ldexp(1.0, n - 1) - 1);
  std::vector<double> words(13, 0.0);
  for (const auto& e : s.elements)
    if (!e.word.empty()) words[static_cast<std::size_t>(e.tau)] += 1;
  for (int n = 1; n <= 12; ++n) EXPECT_EQ(words[static_cast<std::size_t>(n)], counts[static_cast<std::size_t>(n - 1)]);
  auto p = count_profile(s);
  EXPECT_NEAR(p.h_fit, std::log(2.0), 1e-3);
  EXPECT_LT(p.h_fit, CatMap().log_lambda() - 0.05);
}

TEST(CatScheme, IntervalsTileTheBase) {
  const auto& s = cat_scheme();
  const auto& P = part().rect(kCatBaseSymbol);
  const double lam = CatMap().lambda;
  double width = 0.0, mass = 0.0;
  std::vector<std::pair<double, double>> iv;
  for (const auto& e : s.elements) {
    mass += e.mass;
    if (e.geometry.is_null()) continue;
    const auto u = e.geometry["u"].get<std::vector<double>>();
    EXPECT_NEAR(u[1] - u[0], P.width() * std::pow(lam, -e.tau), 1e-13);
    width += u[1] - u[0];
    iv.push_back({u[0], u[1]});
  }
  std::sort(iv.begin(), iv.end());
  for (std::size_t i = 1; i < iv.size(); ++i) EXPECT_GE(iv[i].first, iv[i - 1].second - 1e-13);
  double expect = 0.0;
  for (int n = 2; n <= 12; ++n) expect += (std::ldexp(1.0, n - 1) - 1) * std::pow(lam, -n);
  EXPECT_NEAR(width / P.width(), expect, 1e-12);
  EXPECT_NEAR(mass, 1.0, 1e-6);  // tail beyond 64 is (2/lambda)^64
}

TEST(CatScheme, OrbitAndSymbolicTauAgree) {
  auto r = cat_tau_cross_check(part(), kCatBaseSymbol, 200, 50, 30);
  EXPECT_GE(r.fraction, 0.99);
}

TEST(CatScheme, ValidateSchemeConditions) {
  const CatMapAdapter A(part(), kCatBaseSymbol);
  EXPECT_LT(A.inverse_defect(1000), 1e-9);
  auto rep = validate_scheme(cat_scheme(), A);
  EXPECT_EQ(rep["I1"]["verdict"], "pass");
  EXPECT_EQ(rep["I2"]["verdict"], "pass");
  EXPECT_NEAR(json_number(rep["I2"]["rate_median"]), 1.0 / CatMap().lambda, 0.05);
  EXPECT_EQ(rep["I3"]["verdict"], "pass");
  EXPECT_EQ(rep["I4"]["verdict"], "pass");
}

TEST(CatScheme, PlantedOverlapFlagged) {
  auto s = cat_scheme();
  SchemeElement dup;
  for (const auto& e : s.elements)
    if (e.tau == 3 && !e.geometry.is_null()) dup = e;
  auto u = dup.geometry["u"].get<std::vector<double>>();
  const double w = u[1] - u[0];
  dup.geometry["u"] = {u[0] + 0.5 * w, u[1] + 0.5 * w};
  dup.id = s.size();
  s.elements.push_back(dup);
  auto rep = validate_scheme(s, CatMapAdapter(part(), kCatBaseSymbol));
  EXPECT_EQ(rep["I3"]["verdict"], "fail");
}

TEST(SymbolicScheme, FullShiftTauOnePasses) {
  auto s = first_return_scheme(SFT::full(3), 0, 1, 1);
  s.elements.clear();
  for (int j = 0; j < 3; ++j) {
    SchemeElement e;
    e.id = j;
    e.tau = 1;
    e.word = {j};
    s.elements.push_back(e);
  }
  auto rep = validate_scheme(s);
  for (auto k : {"I1", "I2", "I3", "I4"}) EXPECT_EQ(rep[k]["verdict"], "pass") << k;
}

TEST(CatScheme, YoungConditions) {
  const CatMapAdapter A(part(), kCatBaseSymbol);
  auto rep = check_Y_conditions(cat_scheme(), A);
  EXPECT_EQ(rep["Y0"]["verdict"], "pass");
  EXPECT_GT(json_number(rep["Y0"]["leaf_fraction"]), 0.99);
  EXPECT_EQ(rep["Y1"]["verdict"], "pass");
  EXPECT_NEAR(json_number(rep["Y3"]["alpha_per_step"]), 1.0 / CatMap().lambda, 1e-6);
  EXPECT_EQ(rep["Y3"]["verdict"], "pass");
  EXPECT_EQ(json_number(rep["Y4"]["c"]), 0.0);
  EXPECT_EQ(rep["Y5"]["verdict"], "pass");
}

TEST(CatScheme, PlantedNonMarkovRectangle) {
  const auto& R = part().rect(kCatBaseSymbol);
  const Box shrunk{R.u0, R.u1 - 0.3 * R.width(), R.s0, R.s1};
  const CatMapAdapter A(part(), kCatBaseSymbol, shrunk);
  // elements of the shrunk base, exact geometry not needed beyond a seed point
  InducingScheme s;
  s.kind = "smooth";
  std::mt19937_64 rng(5);
  for (int k = 0; k < 40; ++k) {
    const Vec2 us{shrunk.u0 + (k + 0.5) / 40 * shrunk.width(), 0.5 * (R.s0 + R.s1)};
    auto r = A.first_return(A.from_local(us), 64, false);
    if (!r) continue;
    SchemeElement e;
    e.id = s.size();
    e.tau = r->tau;
    e.word = r->word;
    e.geometry = json{{"u", {us.x - 1e-9, us.x + 1e-9}}, {"s", {R.s0, R.s1}}};
    s.elements.push_back(e);
  }
  auto rep = check_Y_conditions(s, A);
  EXPECT_EQ(rep["Y1"]["verdict"], "fail");
}

TEST(CatScheme, L1DiametersAndPlantedIsometry) {
  const CatMapAdapter A(part(), kCatBaseSymbol);
  auto r = check_L1(cat_scheme(), A, 0.1);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.l, 8);
  EXPECT_EQ(r.N, r.l + 1);
  const TranslationAdapter B(part(), kCatBaseSymbol);
  auto bad = check_L1(cat_scheme(), B, 0.1);
  EXPECT_FALSE(bad.pass);
}

TEST(CatScheme, PressureLine) {
  const auto& s = cat_scheme();
  const double ll = CatMap().log_lambda();
  for (double t : {-0.25, 0.0, 0.25, 0.5, 0.75, 1.0}) {
    auto bar = induced_one_block(s, induce_geometric(s, t).value);
    auto r = solve_PL(bar, s, -5.0, 5.0);
    EXPECT_NEAR(r.root, (1 - t) * ll, 2e-3) << t;
  }
}

TEST(CatScheme, PConditionsForPhiOne) {
  const auto& s = cat_scheme();
  auto v = induce_geometric(s, 1.0);
  auto rep = check_P_conditions(s, v, 0.0, {0.05, 0.1});
  EXPECT_EQ(rep.P3.at("verdict"), "pass");
  EXPECT_NEAR(json_number(rep.P3.at("partial").back()), 1.0, 1e-6);
}
