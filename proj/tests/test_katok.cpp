#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "tower_thermo/katok.hpp"

using namespace tower_thermo;

namespace {

const double kLogLambda = std::log((3 + std::sqrt(5.0)) / 2);

SlowdownParams identity_params() {
  SlowdownParams p;
  p.psi_variant = "identity";
  return p;
}

const KatokAdapter& default_adapter() {
  static const KatokAdapter A(KatokMap(SlowdownParams{}), MarkovPartition::standard(), kCatBaseSymbol);
  return A;
}

const InducingScheme& default_scheme() {
  static const InducingScheme s = [] {
    GridSchemeOptions o;
    o.nx = o.ny = 120;
    return katok_first_return_scheme(default_adapter(), o);
  }();
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// psi

TEST(Slowdown, PsiShape) {
  for (const char* v : {"normalized", "as_printed"}) {
    SlowdownParams p;
    p.psi_variant = v;
    EXPECT_EQ(p.psi(p.rho()), 1.0) << v;
    EXPECT_EQ(p.psi(0.5), 1.0) << v;
    EXPECT_EQ(p.psi(0.0), 0.0) << v;
    EXPECT_NEAR(p.psi(p.rho() * (1 - 1e-6)), 1.0, 1e-9) << v;
    auto rep = check_slowdown(p);
    EXPECT_TRUE(rep["K3"]["pass"].get<bool>()) << v;
    EXPECT_TRUE(rep["pass"].get<bool>()) << v;
  }
  SlowdownParams p;
  EXPECT_NEAR(p.psi(0.25 * p.rho()), std::pow(0.25, p.alpha), 1e-15);
  p.psi_variant = "as_printed";
  EXPECT_NEAR(p.psi(0.25 * p.rho()), std::pow(0.25 * p.rho() * p.rho(), p.alpha), 1e-15);
}

TEST(Slowdown, DerivativeMatchesFiniteDifference) {
  SlowdownParams p;
  for (double f : {0.1, 0.3, 0.49, 0.55, 0.7, 0.9}) {
    const double u = f * p.rho(), h = 1e-7 * p.rho();
    const double fd = (p.psi(u + h) - p.psi(u - h)) / (2 * h);
    EXPECT_NEAR(p.dpsi(u), fd, 1e-5 * std::max(1.0, std::abs(fd))) << f;
  }
}

TEST(Slowdown, Validation) {
  SlowdownParams p;
  p.alpha = 0.6;
  EXPECT_THROW(p.validate(), InvalidInput);
  EXPECT_THROW(SlowdownParams::from_json({{"r0", 0.3}, {"r1", 0.2}}), InvalidInput);
  EXPECT_THROW(SlowdownParams::from_json({{"psi_variant", "cubic"}}), InvalidInput);
  SlowdownParams q;
  q.r1 = 0.2;  // lambda r0 > r1
  EXPECT_FALSE(check_slowdown(q)["domain"]["pass"].get<bool>());
}

// ---------------------------------------------------------------------------
// Integrator and flow

TEST(Dopri5, LinearAndOscillator) {
  auto decay = [](const OdeState<1>& y, OdeState<1>& d) { d[0] = -y[0]; };
  EXPECT_NEAR(dopri5<1>(decay, {1.0}, 1.0, 1e-11)[0], std::exp(-1.0), 1e-10);
  EXPECT_NEAR(dopri5<1>(decay, {1.0}, -2.0, 1e-11)[0], std::exp(2.0), 1e-9);
  auto osc = [](const OdeState<2>& y, OdeState<2>& d) { d = {y[1], -y[0]}; };
  const auto y = dopri5<2>(osc, {1.0, 0.0}, 2 * std::numbers::pi, 1e-11);
  EXPECT_NEAR(y[0], 1.0, 1e-9);
  EXPECT_NEAR(y[1], 0.0, 1e-9);
}

TEST(TimeOneMap, OriginIsFixed) {
  auto r = time_one_map(SlowdownParams{}, {0.0, 0.0});
  EXPECT_EQ(r.s.x, 0.0);
  EXPECT_EQ(r.s.y, 0.0);
  EXPECT_TRUE(r.flagged);
}

TEST(TimeOneMap, IdentityPsiIsLinearFlow) {
  const double lam = CatMap().lambda;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-0.2, 0.2);
  for (int i = 0; i < 200; ++i) {
    const Vec2 s{U(rng), U(rng)};
    auto r = time_one_map(identity_params(), s);
    EXPECT_NEAR(r.s.x, lam * s.x, 1e-8);
    EXPECT_NEAR(r.s.y, s.y / lam, 1e-8);
  }
}

TEST(TimeOneMap, FirstIntegralLiouvilleSeam) {
  for (const char* v : {"normalized", "as_printed"}) {
    SlowdownParams p;
    p.psi_variant = v;
    auto c = flow_checks(p, 500);
    EXPECT_LE(c.first_integral, 1e-8) << v;
    EXPECT_LE(c.liouville, 1e-6) << v;
    EXPECT_LE(c.seam, 1e-8) << v;
  }
}

TEST(TimeOneMap, SlowerInsideTheDisk) {
  SlowdownParams p;
  const Vec2 s{0.03, 0.0};
  EXPECT_LT(time_one_map(p, s).s.x, CatMap().lambda * s.x);
  EXPECT_GT(time_one_map(p, s).s.x, s.x);
}

// ---------------------------------------------------------------------------
// G

TEST(KatokMap, DispatchAndFixedPoint) {
  const KatokMap G(SlowdownParams{});
  const CatMap T;
  const Vec2 far{0.5, 0.5};
  EXPECT_FALSE(G.in_disk(far));
  const Vec2 g = G.step(far), t = T.apply(far);
  EXPECT_EQ(g.x, t.x);
  EXPECT_EQ(g.y, t.y);
  const Vec2 o = G.step({0.0, 0.0});
  EXPECT_EQ(o.x, 0.0);
  EXPECT_EQ(o.y, 0.0);
}

TEST(KatokMap, InverseAndDegenerateCase) {
  const KatokAdapter& A = default_adapter();
  EXPECT_LT(A.inverse_defect(3000, 5), 1e-8);
  EXPECT_LE(degenerate_step_deviation(SlowdownParams{}, 10000, 20), 1e-7);
}

TEST(KatokMap, JacobianMatchesFiniteDifferences) {
  const KatokMap G(SlowdownParams{});
  const CatMap T;
  for (Vec2 e : {Vec2{0.05, 0.02}, Vec2{-0.01, 0.08}, Vec2{0.2, -0.1}}) {
    const Vec2 x = wrap(T.from_eigen(e));
    const auto st = G.step_with_jacobian(x);
    const double h = 1e-6;
    for (int c = 0; c < 2; ++c) {
      const Vec2 d = c == 0 ? Vec2{h, 0} : Vec2{0, h};
      const Vec2 a = G.step(wrap(x + d)), b = G.step(wrap(x - d));
      EXPECT_NEAR(wrap_signed(a.x - b.x) / (2 * h), st.D(0, c), 1e-5);
      EXPECT_NEAR(wrap_signed(a.y - b.y) / (2 * h), st.D(1, c), 1e-5);
    }
    EXPECT_NEAR(std::abs((st.D * G.inverse_with_jacobian(st.image).D).determinant()), 1.0, 1e-8);
  }
}

TEST(UnstableJacobian, LinearCases) {
  const KatokMap D(identity_params());
  for (double g : D.unstable_jacobian({0.013, 0.021}, 30)) EXPECT_NEAR(g, kLogLambda, 1e-8);
  // e_u pushed by T outside D_{r1}
  const KatokMap G(SlowdownParams{});
  Vec2 v = CatMap().eu;
  double g = 0.0;
  G.step_tangent({0.5, 0.5}, v, g);
  EXPECT_NEAR(g, kLogLambda, 1e-14);
}

TEST(UnstableJacobian, DirectionIsInvariant) {
  const KatokMap G(SlowdownParams{});
  const CatMap T;
  const Vec2 x = wrap(T.from_eigen({0.04, 0.05}));
  Vec2 v = G.unstable_direction(x, 16);
  double g = 0.0;
  const Vec2 y = G.step_tangent(x, v, g);
  const Vec2 w = G.unstable_direction(y, 17);
  EXPECT_GT(std::abs(v.dot(w)), 1 - 1e-6);
}

// ---------------------------------------------------------------------------
// Density

TEST(Density, Kappa0AgainstIndependentQuadrature) {
  SlowdownParams p;
  const KatokMap G(p);
  const InvariantDensity rho(G);
  // pure power law on [0, rho/2] in closed form, Gauss-Kronrod on the blend
  const double a = p.alpha, r = p.rho();
  const double head = r * std::pow(0.5, 1 - a) / (1 - a);
  const double blend =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate([&](double u) { return 1 / p.psi(u); }, 0.5 * r, r,
                                                                   15, 1e-14);
  const double kappa = 1 / (1 - std::numbers::pi * r + std::numbers::pi * (head + blend));
  EXPECT_NEAR(rho.kappa0(), kappa, 1e-6 * kappa);
  EXPECT_LT(rho.kappa0(), 1.0);
  EXPECT_EQ(rho({0.5, 0.5}), rho.kappa0());
  EXPECT_TRUE(std::isinf(rho({0.0, 0.0})));
  EXPECT_GT(rho(wrap(CatMap().from_eigen({0.01, 0.0}))), rho.kappa0());
}

TEST(Density, IdentityIsArea) {
  const KatokMap G(identity_params());
  const InvariantDensity rho(G);
  EXPECT_EQ(rho.kappa0(), 1.0);
  EXPECT_EQ(rho({0.01, 0.0}), 1.0);
}

TEST(Density, InvarianceOnBoxes) {
  const KatokMap G(SlowdownParams{});
  const InvariantDensity rho(G);
  EXPECT_LE(density_invariance(G, rho, 100).max_rel_deviation, 1e-3);
}

TEST(Density, WrongDensityIsDetected) {
  const KatokMap G(SlowdownParams{});
  auto bad = [&](Vec2 x) {
    const Vec2 e = G.local(x);
    return G.params().psi(e.x * e.x + e.y * e.y);
  };
  EXPECT_GT(density_invariance(G, bad, 100).max_rel_deviation, 1e-2);
}

// ---------------------------------------------------------------------------
// Lyapunov exponent

TEST(Lyapunov, IdentityGivesLogLambda) {
  const KatokMap G(identity_params());
  const InvariantDensity rho(G);
  EXPECT_NEAR(lyapunov_space_average(G, rho, 30), kLogLambda, 1e-8);
  EXPECT_NEAR(lyapunov_time_average(G, 2000), kLogLambda, 1e-8);
}

TEST(Lyapunov, DefaultParamsBelowLogLambda) {
  const KatokMap G(SlowdownParams{});
  auto r = lyapunov_report(G, 100000, 80);
  EXPECT_GT(r.space_average, 0.1);
  EXPECT_LT(r.space_average, kLogLambda);
  EXPECT_LT(r.time_average, kLogLambda);
  EXPECT_LT(r.relative_gap, 0.02);
}

TEST(Lyapunov, StrongerSlowdownLowersExponent) {
  SlowdownParams p;
  p.psi_variant = "as_printed";
  const KatokMap G(p);
  const InvariantDensity rho(G);
  const KatokMap H(SlowdownParams{});
  const InvariantDensity rh(H);
  EXPECT_LT(lyapunov_space_average(G, rho, 60), lyapunov_space_average(H, rh, 60));
}

// ---------------------------------------------------------------------------
// First-return scheme

TEST(KatokScheme, RejectsBaseMeetingTheDisk) {
  SlowdownParams p;
  p.r1 = 0.33;
  EXPECT_THROW(KatokAdapter(KatokMap(p), MarkovPartition::standard(), kCatBaseSymbol), PreconditionError);
}

TEST(KatokScheme, SmallDiskKeepsCatSkeleton) {
  SlowdownParams p;
  p.r0 = 0.02;
  p.r1 = 0.06;
  const auto part = MarkovPartition::standard();
  const KatokAdapter A(KatokMap(p), part, kCatBaseSymbol);
  GridSchemeOptions o;
  o.nx = o.ny = 60;
  o.complete = false;
  std::vector<GridCell> cells;
  auto s = katok_first_return_scheme(A, o, &cells);
  const auto cat = cat_first_return_scheme(part, kCatBaseSymbol, 4, 4);
  std::set<std::vector<int>> cw, kw;
  for (const auto& e : cat.elements) cw.insert(e.word);
  for (const auto& e : s.elements)
    if (e.tau <= 4) kw.insert(e.word);
  EXPECT_EQ(cw, kw);
  const auto& P = part.rect(kCatBaseSymbol);
  long agree = 0;
  for (const auto& c : cells) {
    const double u = P.u0 + (c.i + 0.5) / o.nx * P.width();
    auto t = part.symbolic_return(kCatBaseSymbol, u, kCatBaseSymbol, o.horizon);
    if (t && *t == c.tau) ++agree;
  }
  EXPECT_GE(static_cast<double>(agree) / cells.size(), 0.99);
}

TEST(KatokScheme, StructureAndCompletion) {
  const auto& s = default_scheme();
  EXPECT_EQ(s.kind, "smooth");
  for (const auto& e : s.elements) {
    EXPECT_TRUE(e.first_return);
    EXPECT_TRUE(std::isfinite(e.log_ju));
  }
  // completed shells carry the T-partition counts
  const auto S = first_return_counts(MarkovPartition::standard().sft(), kCatBaseSymbol, s.max_tau());
  const auto c = s.shell_counts();
  for (int n = 1; n <= 30; ++n) EXPECT_GE(c[static_cast<std::size_t>(n)], S[static_cast<std::size_t>(n - 1)]) << n;
  EXPECT_NEAR(count_profile(s).h_fit, std::log(2.0), 0.02);
  auto j = InducingScheme::from_json(s.to_json());
  EXPECT_EQ(j.size(), s.size());
}

TEST(KatokScheme, CellsCsv) {
  std::vector<GridCell> cells{{0, 1, 3, {1, 2, 4}, 0.0}, {2, 0, 0, {}, 0.0}};
  EXPECT_EQ(grid_cells_csv(cells), "cell_x,cell_y,tau,word\n0,1,3,1-2-4\n2,0,0,\n");
}

TEST(KatokScheme, PressureEndpoints) {
  const auto c = pressure_curve(default_scheme(), {-0.25, 0.0, 0.25, 0.5, 0.75, 1.0});
  ASSERT_EQ(c.points.size(), 6u);
  for (const auto& p : c.points) EXPECT_TRUE(p.available);
  EXPECT_NEAR(c.points[1].P_L, kLogLambda, 5e-2);
  EXPECT_NEAR(c.points[5].P_L, 0.0, 5e-2);
  EXPECT_TRUE(c.convex);
  EXPECT_TRUE(c.nonincreasing);
}

TEST(KatokScheme, InducingConditions) {
  const auto& s = default_scheme();
  const auto& A = default_adapter();
  auto v = validate_scheme(s, A);
  for (auto k : {"I1", "I2", "I3", "I4"}) EXPECT_EQ(v[k]["verdict"], "pass") << k << v[k].dump().substr(0, 400);
  auto y = check_Y_conditions(s, A);
  EXPECT_LT(json_number(y["Y3"]["alpha_hat"]), 1.0);
  EXPECT_EQ(y["Y4"]["verdict"], "pass");
  EXPECT_LT(json_number(y["Y4"]["beta"]), 1.0);
  EXPECT_EQ(y["Y5"]["verdict"], "pass");
  EXPECT_TRUE(check_L1(s, A, 0.05).pass);
}

TEST(KatokScheme, NegativeT0) {
  const auto& A = default_adapter();
  const InvariantDensity rho(A.map());
  const double chi = lyapunov_space_average(A.map(), rho, 60);
  const double l1 = katok_log_lambda1(A, 10);
  EXPECT_GT(l1, chi);
  const double t0 = estimate_t0(count_profile(default_scheme()).h_fit, -chi, l1);
  EXPECT_LT(t0, 0.0);
  EXPECT_TRUE(std::isfinite(t0));
}

// ---------------------------------------------------------------------------
// Config

TEST(KatokConfig, ParseAndReject) {
  auto c = KatokConfig::from_json({{"r0", 0.1}, {"alpha", 0.25}, {"grid", {{"nx", 50}, {"ny", 40}}}, {"horizon", 20}});
  EXPECT_EQ(c.nx, 50);
  EXPECT_EQ(c.ny, 40);
  EXPECT_EQ(c.horizon, 20);
  EXPECT_EQ(KatokConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(KatokConfig::from_json({{"radius", 0.1}}), InvalidInput);
  EXPECT_THROW(KatokConfig::from_json({{"grid", {{"nz", 3}}}}), InvalidInput);
}
