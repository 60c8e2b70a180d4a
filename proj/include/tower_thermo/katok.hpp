#pragma once

// The Katok slow-down of the cat map T. Near the origin T is the time-one map
// of the linear flow s1' = s1 log lambda, s2' = -s2 log lambda in
// eigencoordinates; inside D_{r1} that flow is replaced by the one with speed
// psi(s1^2 + s2^2). The slowed map G preserves the density kappa0 / psi.
//
// psi is a function of u = s1^2 + s2^2 equal to 1 for u >= rho = r0^2, so the
// slow-down region is the disk of radius r0.

#include <Eigen/Dense>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tower_thermo/catmap.hpp"
#include "tower_thermo/liftability.hpp"
#include "tower_thermo/smooth.hpp"

namespace tower_thermo {

// ---------------------------------------------------------------------------
// Slow-down function

inline double smoothstep_exp(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x), b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

inline double smoothstep_exp_derivative(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / x), b = std::exp(-1.0 / (1.0 - x));
  const double s = a + b;
  if (s == 0.0) return 0.0;
  return a / s * (b / s) * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x)));
}

struct SlowdownParams {
  double r0 = 0.1;
  double r1 = 0.3;
  double alpha = 0.25;
  std::string psi_variant = "normalized";  // "normalized" | "as_printed" | "identity"
  double ode_tol = 1e-10;
  double guard_radius = 1e-6;

  double rho() const { return r0 * r0; }

  // Power law p(u) = (u/rho)^alpha ("normalized") or (u rho)^alpha ("as_printed")
  // on [0, rho/2], blended into 1 over [rho/2, rho] by an exp smoothstep.
  double psi(double u) const {
    if (psi_variant == "identity" || u >= rho()) return 1.0;
    if (u <= 0.0) return 0.0;
    const double p = power(u);
    return p + (1.0 - p) * smoothstep_exp((u - 0.5 * rho()) / (0.5 * rho()));
  }
  double dpsi(double u) const {
    if (psi_variant == "identity" || u >= rho() || u <= 0.0) return 0.0;
    const double p = power(u), dp = alpha * p / u;
    const double x = (u - 0.5 * rho()) / (0.5 * rho());
    return dp * (1.0 - smoothstep_exp(x)) + (1.0 - p) * smoothstep_exp_derivative(x) * (2.0 / rho());
  }

  void validate() const {
    TT_REQUIRE(psi_variant == "normalized" || psi_variant == "as_printed" || psi_variant == "identity", InvalidInput,
               "psi_variant must be normalized, as_printed or identity");
    TT_REQUIRE(r0 > 0.0 && r0 < 1.0, InvalidInput, "r0 must lie in (0, 1)");
    TT_REQUIRE(r1 > r0 && r1 < 0.5, InvalidInput, "need r0 < r1 < 1/2");
    TT_REQUIRE(alpha > 0.0 && alpha < 0.5, InvalidInput, "alpha must lie in (0, 1/2)");
    TT_REQUIRE(ode_tol >= 1e-12 && ode_tol < 1e-2, InvalidInput, "ode_tol must lie in [1e-12, 1e-2)");
    TT_REQUIRE(guard_radius >= 0.0 && guard_radius < r0, InvalidInput, "guard_radius must lie in [0, r0)");
  }

  static SlowdownParams from_json(const json& j) {
    SlowdownParams p;
    if (j.contains("r0")) p.r0 = j.at("r0").get<double>();
    if (j.contains("r1")) p.r1 = j.at("r1").get<double>();
    if (j.contains("alpha")) p.alpha = j.at("alpha").get<double>();
    if (j.contains("psi_variant")) p.psi_variant = j.at("psi_variant").get<std::string>();
    if (j.contains("ode_tol")) p.ode_tol = j.at("ode_tol").get<double>();
    if (j.contains("guard_radius")) p.guard_radius = j.at("guard_radius").get<double>();
    p.validate();
    return p;
  }
  json to_json() const {
    return json{{"r0", r0}, {"r1", r1}, {"alpha", alpha}, {"psi_variant", psi_variant}, {"ode_tol", ode_tol},
                {"guard_radius", guard_radius}};
  }

 private:
  double power(double u) const { return std::pow(psi_variant == "as_printed" ? u * rho() : u / rho(), alpha); }
};

// (K2) psi = 1 beyond rho, (K3) psi' > 0 on a grid of (0, rho), continuity at
// rho, and the containment D_{r0} in Int T(D_{r1}) and Int T^-1(D_{r1}) on the
// boundary circle.
inline json check_slowdown(const SlowdownParams& p, const CatMap& T = CatMap(), int grid = 20000) {
  json r;
  if (p.psi_variant == "identity") {
    r["K3"] = "skipped";
  } else {
    // psi is flat at rho, so points where 1 - psi is below rounding are skipped
    double min_d = kInf;
    bool inc = true;
    double prev = 0.0;
    int resolved = 0;
    for (int i = 1; i < grid; ++i) {
      const double u = p.rho() * i / grid, v = p.psi(u);
      if (1.0 - v < 1e-12) continue;
      ++resolved;
      min_d = std::min(min_d, p.dpsi(u));
      if (!(v > prev)) inc = false;
      prev = v;
    }
    r["K3"] = {{"min_derivative", num(min_d)}, {"increasing", inc}, {"resolved_points", resolved},
               {"pass", inc && min_d > 0.0}};
  }
  r["K2"] = {{"psi_at_rho", num(p.psi(p.rho()))}, {"left_limit", num(p.psi(p.rho() * (1 - 1e-9)))}};
  double worst = 0.0;
  const double lam = T.lambda;
  for (int i = 0; i < 720; ++i) {
    const double th = 2 * std::numbers::pi * i / 720;
    const double c = p.r0 * std::cos(th), s = p.r0 * std::sin(th);
    worst = std::max({worst, std::hypot(lam * c, s / lam), std::hypot(c / lam, lam * s)});
  }
  r["domain"] = {{"max_preimage_radius", num(worst)}, {"r1", p.r1}, {"pass", worst < p.r1}};
  r["pass"] = worst < p.r1 && (p.psi_variant == "identity" || r["K3"]["pass"].get<bool>());
  return r;
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with FSAL, mixed absolute/relative error control.

template <std::size_t N>
using OdeState = std::array<double, N>;

struct OdeStats {
  int steps = 0, rejected = 0;
  bool ok = true;
};

template <std::size_t N, class Rhs>
OdeState<N> dopri5(Rhs&& rhs, OdeState<N> y, double t_end, double tol, OdeStats* stats = nullptr,
                   int max_steps = 100000) {
  static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15,
                          a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729, a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656, a71 = 35.0 / 384, a73 = 500.0 / 1113,
                          a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  OdeStats st;
  const double dir = t_end >= 0 ? 1.0 : -1.0;
  const double T = std::abs(t_end);
  double t = 0.0, h = std::min(0.1, T);
  OdeState<N> k1, k2, k3, k4, k5, k6, k7, tmp, yn;
  auto f = [&](const OdeState<N>& x, OdeState<N>& out) {
    rhs(x, out);
    for (auto& v : out) v *= dir;
  };
  f(y, k1);
  while (t < T) {
    if (st.steps + st.rejected >= max_steps || h < 1e-14) {
      st.ok = false;
      break;
    }
    if (t + h > T) h = T - t;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    f(tmp, k2);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(tmp, k3);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(tmp, k4);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(tmp, k5);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(tmp, k6);
    for (std::size_t i = 0; i < N; ++i)
      yn[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    f(yn, k7);
    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = tol * (1.0 + std::max(std::abs(y[i]), std::abs(yn[i])));
      err = std::max(err, std::abs(e) / sc);
    }
    if (err <= 1.0) {
      t += h;
      y = yn;
      k1 = k7;
      ++st.steps;
    } else {
      ++st.rejected;
    }
    const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= err <= 1.0 ? fac : std::min(1.0, fac);
  }
  if (stats) *stats = st;
  return y;
}

// ---------------------------------------------------------------------------
// Time-one map of the slowed flow

struct FlowResult {
  Vec2 s;
  Eigen::Matrix2d M = Eigen::Matrix2d::Identity();  // tangent map in eigencoordinates
  double div_integral = 0.0;                        // integral of the divergence along the trajectory
  bool flagged = false;                             // inside the guard radius, or step control failed
  int steps = 0;
};

// Integrates the slowed flow for time t_end (negative for the backward flow)
// from s in eigencoordinates; with_tangent adds the variational equation and
// the divergence integral.
inline FlowResult slowed_flow(const SlowdownParams& p, Vec2 s, double t_end, bool with_tangent, double tol = 0.0) {
  const double L = std::log(CatMap().lambda);
  if (tol <= 0.0) tol = p.ode_tol;
  FlowResult r;
  if (s.norm() <= p.guard_radius) {
    r.s = s;
    r.flagged = true;
    return r;
  }
  OdeStats st;
  if (!with_tangent) {
    auto rhs = [&](const OdeState<2>& y, OdeState<2>& d) {
      const double v = p.psi(y[0] * y[0] + y[1] * y[1]) * L;
      d = {y[0] * v, -y[1] * v};
    };
    const auto y = dopri5<2>(rhs, {s.x, s.y}, t_end, tol, &st);
    r.s = {y[0], y[1]};
  } else {
    auto rhs = [&](const OdeState<7>& y, OdeState<7>& d) {
      const double s1 = y[0], s2 = y[1], u = s1 * s1 + s2 * s2;
      const double v = p.psi(u) * L, dv = p.dpsi(u) * L;
      const double j00 = v + 2 * s1 * s1 * dv, j01 = 2 * s1 * s2 * dv;
      const double j10 = -2 * s1 * s2 * dv, j11 = -v - 2 * s2 * s2 * dv;
      d[0] = s1 * v;
      d[1] = -s2 * v;
      d[2] = j00 * y[2] + j01 * y[4];
      d[3] = j00 * y[3] + j01 * y[5];
      d[4] = j10 * y[2] + j11 * y[4];
      d[5] = j10 * y[3] + j11 * y[5];
      d[6] = 2 * dv * (s1 * s1 - s2 * s2);
    };
    const auto y = dopri5<7>(rhs, {s.x, s.y, 1, 0, 0, 1, 0}, t_end, tol, &st);
    r.s = {y[0], y[1]};
    r.M << y[2], y[3], y[4], y[5];
    r.div_integral = y[6];
  }
  r.steps = st.steps;
  r.flagged = !st.ok;
  return r;
}

inline FlowResult time_one_map(const SlowdownParams& p, Vec2 s, bool with_tangent = false, double tol = 0.0) {
  return slowed_flow(p, s, 1.0, with_tangent, tol);
}

// ---------------------------------------------------------------------------
// The map G

class KatokMap {
 public:
  struct Step {
    Vec2 image;
    Eigen::Matrix2d D;  // torus frame
    bool flagged = false;
  };

  explicit KatokMap(SlowdownParams p, CatMap T = CatMap()) : p_(std::move(p)), T_(T) {
    p_.validate();
    E_ << T_.eu.x, T_.es.x, T_.eu.y, T_.es.y;
    A_ << 2, 1, 1, 1;
    Ainv_ << 1, -1, -1, 2;
  }

  const SlowdownParams& params() const { return p_; }
  const CatMap& cat() const { return T_; }

  // Offset from the nearest lattice point in eigencoordinates.
  Vec2 local(Vec2 x) const { return T_.to_eigen({wrap_signed(x.x), wrap_signed(x.y)}); }
  bool in_disk(Vec2 x) const { return local(x).norm() < p_.r1; }

  Vec2 step(Vec2 x) const {
    const Vec2 e = local(x);
    if (e.norm() >= p_.r1) return T_.apply(x);
    return wrap(T_.from_eigen(time_one_map(p_, e).s));
  }

  Vec2 inverse(Vec2 y) const {
    const Vec2 z = T_.inverse(y);
    const Vec2 ez = local(z);
    if (ez.norm() >= p_.r1) return z;
    const Vec2 ey{T_.lambda * ez.x, ez.y / T_.lambda};
    return wrap(T_.from_eigen(slowed_flow(p_, ey, -1.0, false).s));
  }

  Step step_with_jacobian(Vec2 x) const {
    const Vec2 e = local(x);
    if (e.norm() >= p_.r1) return {T_.apply(x), A_, false};
    const auto fr = time_one_map(p_, e, true);
    return {wrap(T_.from_eigen(fr.s)), E_ * fr.M * E_.transpose(), fr.flagged};
  }

  Step inverse_with_jacobian(Vec2 y) const {
    const Vec2 z = T_.inverse(y);
    const Vec2 ez = local(z);
    if (ez.norm() >= p_.r1) return {z, Ainv_, false};
    const Vec2 ey{T_.lambda * ez.x, ez.y / T_.lambda};
    const auto fr = slowed_flow(p_, ey, -1.0, true);
    return {wrap(T_.from_eigen(fr.s)), E_ * fr.M * E_.transpose(), fr.flagged};
  }

  // log |DG v| with v replaced by the normalized image; returns G(x).
  Vec2 step_tangent(Vec2 x, Vec2& v, double& log_growth) const {
    const Vec2 e = local(x);
    Eigen::Vector2d w;
    Vec2 image;
    if (e.norm() >= p_.r1) {
      image = T_.apply(x);
      w = A_ * Eigen::Vector2d(v.x, v.y);
    } else {
      const auto st = step_with_jacobian(x);
      image = st.image;
      w = st.D * Eigen::Vector2d(v.x, v.y);
    }
    const double n = w.norm();
    TT_REQUIRE(n > 1e-300, NumericalError, "tangent vector collapsed");
    v = {w.x() / n, w.y() / n};
    log_growth = std::log(n);
    return image;
  }

  // E^u(x) by pulling x back `steps` times and pushing e_u forward.
  Vec2 unstable_direction(Vec2 x, int steps = 12) const {
    Vec2 z = x;
    for (int i = 0; i < steps; ++i) z = inverse(z);
    Vec2 v = T_.eu;
    double g = 0.0;
    for (int i = 0; i < steps; ++i) z = step_tangent(z, v, g);
    return v;
  }

  // Per-step log J^u along the orbit of x, starting from E^u(x).
  std::vector<double> unstable_jacobian(Vec2 x, int n, int pullback = 12) const {
    TT_REQUIRE(n >= 1, InvalidInput, "unstable_jacobian needs n >= 1");
    Vec2 v = unstable_direction(x, pullback);
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
      double g = 0.0;
      x = step_tangent(x, v, g);
      out.push_back(g);
    }
    return out;
  }

 private:
  SlowdownParams p_;
  CatMap T_;
  Eigen::Matrix2d E_, A_, Ainv_;
};

// ---------------------------------------------------------------------------
// Invariant density kappa0 / psi

class InvariantDensity {
 public:
  explicit InvariantDensity(const KatokMap& G) : G_(&G) {
    const auto& p = G.params();
    if (p.psi_variant == "identity") {
      kappa0_ = 1.0;
      return;
    }
    boost::math::quadrature::tanh_sinh<double> q;
    auto g = [&](double u) { return 1.0 / p.psi(u); };
    double e1 = 0.0, e2 = 0.0;
    const double rho = p.rho();
    const double i1 = q.integrate(g, 0.0, 0.5 * rho, 1e-13, &e1);
    const double i2 = q.integrate(g, 0.5 * rho, rho, 1e-13, &e2);
    const double pi = std::numbers::pi;
    integral_ = i1 + i2;
    kappa0_ = 1.0 / (1.0 - pi * rho + pi * integral_);
    rel_error_ = pi * (e1 + e2) * kappa0_;
  }

  double kappa0() const { return kappa0_; }
  double quadrature_error() const { return rel_error_; }
  // Integral of 1/psi over [0, rho].
  double inverse_psi_integral() const { return integral_; }

  double operator()(Vec2 x) const {
    const Vec2 e = G_->local(x);
    if (e.norm() >= G_->params().r1) return kappa0_;
    const double u = e.x * e.x + e.y * e.y;
    if (u == 0.0) return G_->params().psi_variant == "identity" ? 1.0 : kInf;
    return kappa0_ / G_->params().psi(u);
  }

 private:
  const KatokMap* G_;
  double kappa0_ = 1.0, rel_error_ = 0.0, integral_ = 0.0;
};

struct InvarianceReport {
  int boxes = 0;
  double max_rel_deviation = 0.0;
  json to_json() const { return json{{"boxes", boxes}, {"max_rel_deviation", num(max_rel_deviation)}}; }
};

// nu(B) against nu(G^-1 B) = int_B rho(G^-1 y) |det DG^-1(y)| dy on random
// boxes around the slow-down disk, by tensor Gauss-Legendre quadrature.
template <class Density>
inline InvarianceReport density_invariance(const KatokMap& G, const Density& rho, int boxes = 100,
                                           double side = 0.05, std::uint64_t seed = 1) {
  using GL = boost::math::quadrature::gauss<double, 12>;
  const auto& X = GL::abscissa();
  const auto& W = GL::weights();
  std::vector<double> nodes, weights;
  for (std::size_t i = 0; i < X.size(); ++i) {
    nodes.push_back(X[i]);
    weights.push_back(W[i]);
    if (X[i] != 0.0) {
      nodes.push_back(-X[i]);
      weights.push_back(W[i]);
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  InvarianceReport r;
  // centers over T(D_{r1}), where G^-1 differs from T^-1, clear of the singular point
  const double lu = G.cat().lambda * G.params().r1, ls = G.params().r1;
  while (r.boxes < boxes) {
    const Vec2 c = wrap(G.cat().from_eigen({lu * (2 * U(rng) - 1), ls * (2 * U(rng) - 1)}));
    if (G.local(c).norm() < side) continue;
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const Vec2 y = wrap({c.x + 0.5 * side * nodes[i], c.y + 0.5 * side * nodes[j]});
        const double w = weights[i] * weights[j];
        a += w * rho(y);
        const auto st = G.inverse_with_jacobian(y);
        b += w * rho(st.image) * std::abs(st.D.determinant());
      }
    r.max_rel_deviation = std::max(r.max_rel_deviation, std::abs(a - b) / a);
    ++r.boxes;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sanity checks on the construction

inline double degenerate_step_deviation(const SlowdownParams& p, int points = 10000, int steps = 20,
                                        std::uint64_t seed = 1) {
  SlowdownParams q = p;
  q.psi_variant = "identity";
  const KatokMap G(q);
  const CatMap T;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    Vec2 x{U(rng), U(rng)};
    for (int k = 0; k < steps; ++k) {
      const Vec2 g = G.step(x);
      worst = std::max(worst, torus_distance(g, T.apply(x)));
      x = g;
    }
  }
  return worst;
}

struct FlowChecks {
  double first_integral = 0.0;  // max |s1 s2 before - after|
  double liouville = 0.0;       // max |det M - exp(int div)|
  double seam = 0.0;            // max |g - T| on the boundary circle of D_{r1}
  json to_json() const {
    return json{{"first_integral", num(first_integral)}, {"liouville", num(liouville)}, {"seam", num(seam)}};
  }
};

inline FlowChecks flow_checks(const SlowdownParams& p, int samples = 2000, std::uint64_t seed = 1) {
  const CatMap T;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  FlowChecks c;
  for (int i = 0; i < samples; ++i) {
    const double rad = p.r1 * std::sqrt(U(rng)), th = 2 * std::numbers::pi * U(rng);
    const Vec2 s{rad * std::cos(th), rad * std::sin(th)};
    const auto fr = time_one_map(p, s, true);
    c.first_integral = std::max(c.first_integral, std::abs(s.x * s.y - fr.s.x * fr.s.y));
    c.liouville = std::max(c.liouville, std::abs(fr.M.determinant() - std::exp(fr.div_integral)));
  }
  for (int i = 0; i < 720; ++i) {
    const double th = 2 * std::numbers::pi * i / 720;
    const Vec2 s{p.r1 * std::cos(th), p.r1 * std::sin(th)};
    const Vec2 g = time_one_map(p, s).s;
    c.seam = std::max(c.seam, std::hypot(g.x - T.lambda * s.x, g.y - s.y / T.lambda));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Lyapunov exponent with respect to nu

struct LyapunovReport {
  double space_average = 0.0;
  double time_average = 0.0;
  double relative_gap = 0.0;
  double kappa0_log_lambda = 0.0;
  long orbit_steps = 0;
  int grid = 0;
  json to_json() const {
    return json{{"space_average", num(space_average)}, {"time_average", num(time_average)},
                {"relative_gap", num(relative_gap)}, {"kappa0_log_lambda", num(kappa0_log_lambda)},
                {"orbit_steps", orbit_steps}, {"grid", grid}};
  }
};

// int log J^u G dnu by midpoint quadrature on a grid of the torus.
inline double lyapunov_space_average(const KatokMap& G, const InvariantDensity& rho, int grid = 200,
                                     int pullback = 12) {
  const auto n = static_cast<std::size_t>(grid) * grid;
  std::vector<double> val(n), w(n);
  parallel_for(n, thread_count(), [&](std::size_t k) {
    const Vec2 x{(static_cast<double>(k / grid) + 0.5) / grid, (static_cast<double>(k % grid) + 0.5) / grid};
    Vec2 v = G.unstable_direction(x, pullback);
    double g = 0.0;
    G.step_tangent(x, v, g);
    val[k] = g;
    w[k] = rho(x);
  });
  double a = 0.0, b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    a += w[k] * val[k];
    b += w[k];
  }
  return a / b;
}

// Birkhoff average of log J^u along `count` orbits of `steps` steps each.
inline double lyapunov_time_average(const KatokMap& G, long steps, int count = 1, std::uint64_t seed = 1) {
  std::vector<double> avg(static_cast<std::size_t>(count));
  parallel_for(avg.size(), thread_count(), [&](std::size_t i) {
    std::mt19937_64 rng(seed + i);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Vec2 x{U(rng), U(rng)};
    Vec2 v = G.unstable_direction(x);
    double sum = 0.0;
    for (long k = 0; k < steps; ++k) {
      double g = 0.0;
      x = G.step_tangent(x, v, g);
      sum += g;
    }
    avg[i] = sum / static_cast<double>(steps);
  });
  double s = 0.0;
  for (double a : avg) s += a;
  return s / count;
}

inline LyapunovReport lyapunov_report(const KatokMap& G, long steps = 1000000, int grid = 200, std::uint64_t seed = 1) {
  const InvariantDensity rho(G);
  LyapunovReport r;
  r.space_average = lyapunov_space_average(G, rho, grid);
  r.time_average = lyapunov_time_average(G, steps, 1, seed);
  r.relative_gap = std::abs(r.space_average - r.time_average) / std::abs(r.space_average);
  r.kappa0_log_lambda = rho.kappa0() * G.cat().log_lambda();
  r.orbit_steps = steps;
  r.grid = grid;
  return r;
}

// ---------------------------------------------------------------------------
// Adapter and first-return scheme over a Markov rectangle

class KatokAdapter : public TorusPartitionAdapter {
 public:
  KatokAdapter(KatokMap G, MarkovPartition part, int base, std::optional<Box> box = std::nullopt, int pullback = 12)
      : TorusPartitionAdapter(std::move(part), base, box), G_(std::move(G)), pullback_(pullback) {
    // G = T on the base requires the base to stay clear of D_{r1}
    const auto B = base_box();
    double dmin = kInf;
    for (int i = 0; i <= 40; ++i)
      for (int j = 0; j <= 40; ++j)
        dmin = std::min(dmin, G_.local(from_local({B.u0 + B.width() * i / 40, B.s0 + B.height() * j / 40})).norm());
    TT_REQUIRE(dmin > G_.params().r1, PreconditionError, "base rectangle meets the slow-down disk D_r1");
    clearance_ = dmin;
  }

  std::string name() const override { return "katok"; }
  Vec2 f(Vec2 x) const override { return G_.step(x); }
  Vec2 f_inv(Vec2 x) const override { return G_.inverse(x); }
  Vec2 unstable_direction(Vec2 x) const override { return G_.unstable_direction(x, pullback_); }
  double log_ju_step(Vec2 x, Vec2& v) const override {
    double g = 0.0;
    G_.step_tangent(x, v, g);
    return g;
  }
  Vec2 step_tangent(Vec2 x, Vec2& v, double& log_growth) const override { return G_.step_tangent(x, v, log_growth); }

  const KatokMap& map() const { return G_; }
  double clearance() const { return clearance_; }

 private:
  KatokMap G_;
  int pullback_;
  double clearance_ = 0.0;
};

struct GridCell {
  int i = 0, j = 0;
  int tau = 0;  // 0: no return within the horizon
  std::vector<int> word;
  double log_ju = 0.0;
};

struct GridSchemeOptions {
  int nx = 400, ny = 400;
  int horizon = 30;
  bool complete = true;      // add unfound words from the T-partition counts
  bool refine_geometry = true;  // bisect each found element's u- and s-extent through its first cell
  int completion_shells = 64;
};

// Orbit-grid first returns to the base grouped by itinerary word. Found
// elements get the mean log J^u F of their cells and the cell fraction as
// mass. With completion, shells n <= horizon with fewer words than the
// transfer-matrix count S_n get one class for the missing words, sharing the
// shell's cell fraction not explained by the found Jacobians; the residual
// cells are spread over shells horizon+1..completion_shells in proportion to
// S_n lambda^-n.
inline InducingScheme katok_first_return_scheme(const KatokAdapter& A, const GridSchemeOptions& opt,
                                                std::vector<GridCell>* cells_out = nullptr) {
  TT_REQUIRE(opt.nx >= 1 && opt.ny >= 1 && opt.horizon >= 1, InvalidInput, "grid and horizon must be positive");
  const Box B = A.base_box();
  const auto n = static_cast<std::size_t>(opt.nx) * opt.ny;
  std::vector<GridCell> cells(n);
  parallel_for(n, thread_count(), [&](std::size_t k) {
    GridCell& c = cells[k];
    c.i = static_cast<int>(k / opt.ny);
    c.j = static_cast<int>(k % opt.ny);
    const Vec2 us{B.u0 + (c.i + 0.5) / opt.nx * B.width(), B.s0 + (c.j + 0.5) / opt.ny * B.height()};
    if (auto r = A.first_return(A.from_local(us), opt.horizon)) {
      c.tau = r->tau;
      c.word = std::move(r->word);
      c.log_ju = r->log_ju;
    }
  });

  struct Agg {
    long count = 0;
    double log_ju = 0.0;
    int i0 = 1 << 30, i1 = -1, j0 = 1 << 30, j1 = -1;
    Vec2 seed;
  };
  std::map<std::vector<int>, Agg> groups;
  long residual = 0;
  for (const auto& c : cells) {
    if (c.tau == 0) {
      ++residual;
      continue;
    }
    auto& g = groups[c.word];
    if (g.count == 0) g.seed = {B.u0 + (c.i + 0.5) / opt.nx * B.width(), B.s0 + (c.j + 0.5) / opt.ny * B.height()};
    ++g.count;
    g.log_ju += c.log_ju;
    g.i0 = std::min(g.i0, c.i);
    g.i1 = std::max(g.i1, c.i);
    g.j0 = std::min(g.j0, c.j);
    g.j1 = std::max(g.j1, c.j);
  }
  const double N = static_cast<double>(n);
  InducingScheme s;
  s.kind = "smooth";
  s.horizon = opt.horizon;
  std::vector<double> found(static_cast<std::size_t>(opt.horizon + 1), 0.0), shell(found), explained(found);
  for (const auto& [w, g] : groups) {
    SchemeElement e;
    e.id = s.size();
    e.tau = static_cast<int>(w.size());
    e.word = w;
    e.log_ju = g.log_ju / g.count;
    e.mass = g.count / N;
    e.geometry = json{{"u", {B.u0 + g.i0 * B.width() / opt.nx, B.u0 + (g.i1 + 1) * B.width() / opt.nx}},
                      {"s", {B.s0 + g.j0 * B.height() / opt.ny, B.s0 + (g.j1 + 1) * B.height() / opt.ny}},
                      {"cells", g.count}};
    found[static_cast<std::size_t>(e.tau)] += 1;
    shell[static_cast<std::size_t>(e.tau)] += e.mass;
    explained[static_cast<std::size_t>(e.tau)] += std::exp(-e.log_ju);
    s.elements.push_back(std::move(e));
  }
  s.residual_mass = residual / N;
  TT_REQUIRE(!s.elements.empty(), PreconditionError, "no grid cell returns within the horizon");
  if (opt.refine_geometry) {
    std::vector<const Agg*> aggs;
    for (const auto& kv : groups) aggs.push_back(&kv.second);
    parallel_for(aggs.size(), thread_count(), [&](std::size_t k) {
      auto& e = s.elements[k];
      auto same = [&](Vec2 q) { return detail::word_at(A, q, e.tau) == e.word; };
      const auto [lo, hi] = detail::leaf_extent(B, aggs[k]->seed, 0, same);
      // words depend on s for orbits through D_{r1}, so elements need not cross W
      const auto [slo, shi] = detail::leaf_extent(B, aggs[k]->seed, 1, same);
      e.geometry["u"] = {lo, hi};
      e.geometry["s"] = {slo, shi};
      e.geometry["refined"] = true;
    });
  }

  json completion = json::array();
  if (opt.complete) {
    const int p = A.base_symbol();
    const int top = std::max(opt.completion_shells, opt.horizon);
    const auto S = first_return_counts(A.partition().sft(), p, top);
    const double lam = A.partition().cat().lambda;
    for (int k = 1; k <= opt.horizon; ++k) {
      const double missing = S[static_cast<std::size_t>(k - 1)] - found[static_cast<std::size_t>(k)];
      if (missing <= 0.0) continue;
      // without cell mass left over, the missing words get the cat-map leaf mass
      const double left = shell[static_cast<std::size_t>(k)] - explained[static_cast<std::size_t>(k)];
      const double each = left > 0.0 ? left / missing : std::pow(lam, -k);
      SchemeElement e;
      e.id = s.size();
      e.tau = k;
      e.multiplicity = missing;
      e.log_ju = -std::log(each);
      e.mass = each * missing;
      s.elements.push_back(e);
      completion.push_back({{"tau", k}, {"missing", missing}, {"mass_each", num(each)}, {"leftover", left > 0.0}});
    }
    double z = 0.0;
    for (int k = opt.horizon + 1; k <= top; ++k) z += S[static_cast<std::size_t>(k - 1)] * std::pow(lam, -k);
    if (s.residual_mass > 0.0 && z > 0.0) {
      for (int k = opt.horizon + 1; k <= top; ++k) {
        const double m = S[static_cast<std::size_t>(k - 1)];
        if (m <= 0.0) continue;
        const double each = s.residual_mass * std::pow(lam, -k) / z;
        SchemeElement e;
        e.id = s.size();
        e.tau = k;
        e.multiplicity = m;
        e.log_ju = -std::log(each);
        e.mass = each * m;
        s.elements.push_back(e);
      }
      s.horizon = top;
    }
  }
  s.meta = json{{"construction", "katok_grid_first_return"},
                {"grid", {{"nx", opt.nx}, {"ny", opt.ny}}},
                {"simulation_horizon", opt.horizon},
                {"found_words", groups.size()},
                {"residual_cells", residual},
                {"completed", opt.complete},
                {"completion", completion},
                {"base_symbol", A.base_symbol()},
                {"params", A.map().params().to_json()},
                {"partition", A.partition().to_json()}};
  if (cells_out) *cells_out = std::move(cells);
  return s;
}

inline std::string grid_cells_csv(const std::vector<GridCell>& cells) {
  std::string out = "cell_x,cell_y,tau,word\n";
  for (const auto& c : cells) {
    out += std::to_string(c.i) + ',' + std::to_string(c.j) + ',' + std::to_string(c.tau) + ',';
    for (std::size_t k = 0; k < c.word.size(); ++k) out += (k ? "-" : "") + std::to_string(c.word[k]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pressure curve of the geometric family

struct PressurePoint {
  double t = 0.0;
  double P_L = 0.0;
  bool available = true;
  std::string note;
};

struct PressureCurve {
  std::vector<PressurePoint> points;
  bool convex = true, nonincreasing = true;
  std::string to_csv() const {
    std::string s = "t,P_L\n";
    for (const auto& p : points) s += fmt17(p.t) + ',' + (p.available ? fmt17(p.P_L) : std::string("nan")) + '\n';
    return s;
  }
  json to_json() const {
    json a = json::array();
    for (const auto& p : points) {
      json j{{"t", num(p.t)}, {"P_L", p.available ? num(p.P_L) : json(nullptr)}, {"available", p.available}};
      if (!p.note.empty()) j["note"] = p.note;
      a.push_back(j);
    }
    return json{{"points", a}, {"convex", convex}, {"nonincreasing", nonincreasing}};
  }
};

inline PressureCurve pressure_curve(const InducingScheme& s, const std::vector<double>& t_grid, double lo = -10.0,
                                    double hi = 10.0, double tol = 1e-9) {
  PressureCurve c;
  for (double t : t_grid) {
    PressurePoint p;
    p.t = t;
    try {
      p.P_L = solve_PL(induced_one_block(s, induce_geometric(s, t).value), s, lo, hi, tol).root;
    } catch (const PreconditionError& e) {
      p.available = false;
      p.note = e.what();
    }
    c.points.push_back(p);
  }
  std::vector<PressurePoint> ok;
  for (const auto& p : c.points)
    if (p.available) ok.push_back(p);
  std::sort(ok.begin(), ok.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  for (std::size_t i = 1; i < ok.size(); ++i)
    if (ok[i].P_L > ok[i - 1].P_L + 1e-9) c.nonincreasing = false;
  for (std::size_t i = 1; i + 1 < ok.size(); ++i) {
    const double w = (ok[i].t - ok[i - 1].t) / (ok[i + 1].t - ok[i - 1].t);
    if (ok[i].P_L > (1 - w) * ok[i - 1].P_L + w * ok[i + 1].P_L + 1e-9) c.convex = false;
  }
  return c;
}

// max log J^u over a grid of the closed base rectangle.
inline double katok_log_lambda1(const KatokAdapter& A, int grid = 40) {
  const Box B = A.base_box();
  double m = kNegInf;
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= grid; ++j) {
      Vec2 x = A.from_local({B.u0 + B.width() * i / grid, B.s0 + B.height() * j / grid});
      Vec2 v = A.unstable_direction(x);
      m = std::max(m, A.log_ju_step(x, v));
    }
  return m;
}

// ---------------------------------------------------------------------------
// Configuration

struct KatokConfig {
  SlowdownParams params;
  json partition = "standard";
  int nx = 400, ny = 400;
  int horizon = 30;

  static KatokConfig from_json(const json& j) {
    TT_REQUIRE(j.is_object(), InvalidInput, "katok config must be an object");
    static const std::vector<std::string> keys{"r0",           "r1",        "alpha", "psi_variant", "ode_tol",
                                               "guard_radius", "partition", "grid",  "horizon"};
    for (auto it = j.begin(); it != j.end(); ++it)
      TT_REQUIRE(std::find(keys.begin(), keys.end(), it.key()) != keys.end(), InvalidInput,
                 "unknown key '" + it.key() + "' in katok config");
    KatokConfig c;
    c.params = SlowdownParams::from_json(j);
    if (j.contains("partition")) c.partition = j.at("partition");
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      for (auto it = g.begin(); it != g.end(); ++it)
        TT_REQUIRE(it.key() == "nx" || it.key() == "ny", InvalidInput, "unknown key '" + it.key() + "' in grid");
      c.nx = g.value("nx", c.nx);
      c.ny = g.value("ny", c.ny);
    }
    c.horizon = j.value("horizon", c.horizon);
    TT_REQUIRE(c.nx >= 1 && c.ny >= 1 && c.horizon >= 1, InvalidInput, "grid and horizon must be positive");
    return c;
  }
  json to_json() const {
    json j = params.to_json();
    j["partition"] = partition;
    j["grid"] = {{"nx", nx}, {"ny", ny}};
    j["horizon"] = horizon;
    return j;
  }
};

}  // namespace tower_thermo
