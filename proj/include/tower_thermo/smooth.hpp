#pragma once

// Adapter interface for a torus map with a base rectangle W carrying local
// product coordinates (u, s), and the finite-resolution checks of the
// inducing-scheme conditions (I1)-(I4), (Y0)-(Y5) and (L1) that run on it.
//
// Elements are located by their first-return itinerary; element geometry in
// a scheme is {"u": [a, b], "s": [s0, s1]} in local coordinates of W.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tower_thermo/tower.hpp"

namespace tower_thermo {

struct Vec2 {
  double x = 0.0, y = 0.0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double c) const { return {c * x, c * y}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline double wrap01(double v) {
  v -= std::floor(v);
  return v >= 1.0 ? 0.0 : v;
}
inline Vec2 wrap(Vec2 p) { return {wrap01(p.x), wrap01(p.y)}; }
inline double wrap_signed(double v) { return v - std::round(v); }
inline double torus_distance(Vec2 a, Vec2 b) { return std::hypot(wrap_signed(a.x - b.x), wrap_signed(a.y - b.y)); }

struct Box {
  double u0 = 0, u1 = 0, s0 = 0, s1 = 0;
  bool contains(Vec2 p) const { return p.x >= u0 && p.x < u1 && p.y >= s0 && p.y < s1; }
  double width() const { return u1 - u0; }
  double height() const { return s1 - s0; }
  json to_json() const { return json{{"u", {u0, u1}}, {"s", {s0, s1}}}; }
};

struct ReturnInfo {
  int tau = 0;
  std::vector<int> word;
  double log_ju = 0.0;  // log J^u F along the return
  Vec2 image;           // torus point f^tau(x)
};

class SmoothSystemAdapter {
 public:
  virtual ~SmoothSystemAdapter() = default;
  virtual std::string name() const = 0;
  virtual Vec2 f(Vec2 x) const = 0;
  virtual Vec2 f_inv(Vec2 x) const = 0;
  virtual Box base_box() const = 0;
  virtual Vec2 from_local(Vec2 us) const = 0;
  virtual std::optional<Vec2> to_local(Vec2 x) const = 0;  // set iff x lies in W
  virtual int symbol(Vec2 x) const = 0;
  // Unit unstable direction at x (torus frame).
  virtual Vec2 unstable_direction(Vec2 x) const = 0;
  // log |Df_x v|; v is replaced by the normalized image direction.
  virtual double log_ju_step(Vec2 x, Vec2& v) const = 0;
  // f(x) together with log_ju_step(x, v); maps with costly steps share the work.
  virtual Vec2 step_tangent(Vec2 x, Vec2& v, double& log_growth) const {
    log_growth = log_ju_step(x, v);
    return f(x);
  }

  bool in_base(Vec2 x) const { return to_local(x).has_value(); }

  std::optional<ReturnInfo> first_return(Vec2 x, int horizon, bool with_jacobian = true) const {
    ReturnInfo r;
    Vec2 v = with_jacobian ? unstable_direction(x) : Vec2{};
    Vec2 y = x;
    for (int n = 1; n <= horizon; ++n) {
      r.word.push_back(symbol(y));
      if (with_jacobian) {
        double g = 0.0;
        y = step_tangent(y, v, g);
        r.log_ju += g;
      } else {
        y = f(y);
      }
      if (in_base(y)) {
        r.tau = n;
        r.image = y;
        return r;
      }
    }
    return std::nullopt;
  }

  // The last visit to W before x, if within the horizon.
  std::optional<Vec2> backward_return(Vec2 x, int horizon) const {
    Vec2 y = x;
    for (int n = 1; n <= horizon; ++n) {
      y = f_inv(y);
      if (in_base(y)) return y;
    }
    return std::nullopt;
  }

  // Self-test: f(f_inv(x)) = x on samples.
  double inverse_defect(int samples, std::uint64_t seed = 1) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
      const Vec2 x{U(rng), U(rng)};
      worst = std::max(worst, torus_distance(f(f_inv(x)), x));
    }
    return worst;
  }
};

// ---------------------------------------------------------------------------
// Element sampling helpers

namespace detail {

struct ElementSample {
  int index;
  int tau;
  std::vector<int> word;
  Box box;  // declared geometry
};

inline std::optional<Box> element_box(const SchemeElement& e) {
  if (!e.geometry.is_object() || !e.geometry.contains("u") || !e.geometry.contains("s")) return std::nullopt;
  const auto u = e.geometry.at("u").get<std::vector<double>>();
  const auto s = e.geometry.at("s").get<std::vector<double>>();
  return Box{u.at(0), u.at(1), s.at(0), s.at(1)};
}

// Up to `count` elements with geometry, spread evenly over tau order.
inline std::vector<ElementSample> sample_elements(const InducingScheme& s, int count) {
  std::vector<ElementSample> all;
  for (std::size_t i = 0; i < s.elements.size(); ++i)
    if (auto b = element_box(s.elements[i])) all.push_back({static_cast<int>(i), s.elements[i].tau, s.elements[i].word, *b});
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.tau < b.tau; });
  if (static_cast<int>(all.size()) <= count) return all;
  std::vector<ElementSample> out;
  for (int k = 0; k < count; ++k)
    out.push_back(all[static_cast<std::size_t>((static_cast<long>(k) * static_cast<long>(all.size() - 1)) / std::max(1, count - 1))]);
  return out;
}

// The word of the first return, or empty if none within the horizon.
inline std::vector<int> word_at(const SmoothSystemAdapter& a, Vec2 us, int horizon) {
  auto r = a.first_return(a.from_local(us), horizon, false);
  return r ? r->word : std::vector<int>{};
}

// Boundary between an inside point `in` and an outside point `out` along a segment.
template <class Pred>
double bisect(double in, double out, Pred&& inside, int iters = 60) {
  for (int i = 0; i < iters && in != out; ++i) {
    const double m = 0.5 * (in + out);
    if (m == in || m == out) break;
    (inside(m) ? in : out) = m;
  }
  return in;
}

// Extent along u (dir 0) or s (dir 1) through the local point p of the set
// where pred holds, clipped to the base box.
template <class Pred>
std::pair<double, double> leaf_extent(const Box& W, Vec2 p, int dir, Pred&& pred) {
  auto at = [&](double t) { return dir == 0 ? Vec2{t, p.y} : Vec2{p.x, t}; };
  const double c = dir == 0 ? p.x : p.y;
  const double lo = dir == 0 ? W.u0 : W.s0;
  const double hi = (dir == 0 ? W.u1 : W.s1) - 1e-15;
  auto inside = [&](double t) { return pred(at(t)); };
  const double a = inside(lo) ? lo : bisect(c, lo, inside);
  const double b = inside(hi) ? hi : bisect(c, hi, inside);
  return {a, b};
}

// Word extent of the element through p along the unstable leaf.
inline std::pair<double, double> element_u_extent(const SmoothSystemAdapter& a, Vec2 p, const std::vector<int>& word,
                                                  int horizon) {
  return leaf_extent(a.base_box(), p, 0, [&](Vec2 q) { return word_at(a, q, horizon) == word; });
}

inline Vec2 box_center(const Box& b) { return {0.5 * (b.u0 + b.u1), 0.5 * (b.s0 + b.s1)}; }

}  // namespace detail

// ---------------------------------------------------------------------------
// (I1)-(I4)

struct SchemeValidationOptions {
  int samples = 16;         // elements examined
  int points = 32;          // points per element
  int horizon = 64;         // step budget per first return
  int induced_steps = 5;    // (I2) depth
  std::uint64_t seed = 1;
};

inline json validate_scheme(const InducingScheme& scheme, const SmoothSystemAdapter& a,
                            const SchemeValidationOptions& opt = {}) {
  json rep;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const Box W = a.base_box();
  const auto els = detail::sample_elements(scheme, opt.samples);
  if (els.empty()) {
    for (auto k : {"I1", "I2", "I3", "I4"}) rep[k] = {{"verdict", "not evaluable"}, {"reason", "no element geometry"}};
    return rep;
  }

  // (I1): sampled points of each element return into W with the element's word.
  {
    long total = 0, contained = 0, same_word = 0;
    for (const auto& e : els)
      for (int k = 0; k < opt.points; ++k) {
        const double fu = 0.02 + 0.96 * U(rng), fs = 0.02 + 0.96 * U(rng);
        const Vec2 p{e.box.u0 + fu * e.box.width(), e.box.s0 + fs * e.box.height()};
        auto r = a.first_return(a.from_local(p), opt.horizon, false);
        ++total;
        if (r && a.in_base(r->image)) ++contained;
        if (r && r->word == e.word && r->tau == e.tau) ++same_word;
      }
    const double frac = double(contained) / total;
    rep["I1"] = {{"samples", total},
                 {"contained_fraction", num(frac)},
                 {"word_fraction", num(double(same_word) / total)},
                 {"verdict", contained == total ? "pass" : "fail"}};
  }

  // (I2): diameters of M_n around random base points.
  {
    std::vector<double> rates;
    bool shrinking = true;
    json traces = json::array();
    const int n_max = opt.induced_steps;
    auto forward_words = [&](Vec2 x, int n) {
      std::vector<std::vector<int>> w;
      for (int i = 0; i < n; ++i) {
        auto r = a.first_return(x, opt.horizon, false);
        if (!r) break;
        w.push_back(r->word);
        x = r->image;
      }
      return w;
    };
    auto backward_words = [&](Vec2 x, int n) {
      std::vector<std::vector<int>> w;
      for (int i = 0; i < n; ++i) {
        auto y = a.backward_return(x, opt.horizon);
        if (!y) break;
        auto r = a.first_return(*y, opt.horizon, false);
        if (!r) break;
        w.push_back(r->word);
        x = *y;
      }
      return w;
    };
    for (int k = 0; k < opt.samples && static_cast<int>(traces.size()) < opt.samples; ++k) {
      const Vec2 p{W.u0 + (0.05 + 0.9 * U(rng)) * W.width(), W.s0 + (0.05 + 0.9 * U(rng)) * W.height()};
      const Vec2 x = a.from_local(p);
      const auto fw = forward_words(x, n_max), bw = backward_words(x, n_max);
      if (static_cast<int>(fw.size()) < n_max || static_cast<int>(bw.size()) < n_max) continue;
      std::vector<double> diam, time;
      int tf = 0, tb = 0;
      for (int n = 1; n <= n_max; ++n) {
        tf += static_cast<int>(fw[static_cast<std::size_t>(n - 1)].size());
        tb += static_cast<int>(bw[static_cast<std::size_t>(n - 1)].size());
        auto [ua, ub] = detail::leaf_extent(W, p, 0, [&](Vec2 q) {
          auto w = forward_words(a.from_local(q), n);
          return std::equal(w.begin(), w.end(), fw.begin(), fw.begin() + n) && static_cast<int>(w.size()) == n;
        });
        auto [sa, sb] = detail::leaf_extent(W, p, 1, [&](Vec2 q) {
          auto w = backward_words(a.from_local(q), n);
          return std::equal(w.begin(), w.end(), bw.begin(), bw.begin() + n) && static_cast<int>(w.size()) == n;
        });
        diam.push_back(std::hypot(ub - ua, sb - sa));
        time.push_back(std::min(tf, tb));
        if (n >= 2 && diam[static_cast<std::size_t>(n - 1)] > diam[static_cast<std::size_t>(n - 2)] * (1 + 1e-9))
          shrinking = false;
      }
      std::vector<double> ld;
      for (double d : diam) ld.push_back(std::log(std::max(d, 1e-300)));
      const double rate = std::exp(ls_slope(time, ld));
      rates.push_back(rate);
      traces.push_back({{"diameters", num_array(diam)}, {"times", time}, {"rate", num(rate)}});
    }
    if (rates.empty()) {
      rep["I2"] = {{"verdict", "not evaluable"}, {"reason", "no sampled point with full itineraries"}};
    } else {
      auto sorted = rates;
      std::sort(sorted.begin(), sorted.end());
      const double med = sorted[sorted.size() / 2];
      rep["I2"] = {{"rate_median", num(med)},
                   {"rate_max", num(sorted.back())},
                   {"traces", traces},
                   {"verdict", shrinking && sorted.back() < 1.0 ? "pass" : "fail"}};
    }
  }

  // (I3): structural, element boxes have pairwise disjoint interiors (sweep in u).
  {
    std::vector<std::pair<Box, int>> boxes;
    for (std::size_t i = 0; i < scheme.elements.size(); ++i)
      if (auto b = detail::element_box(scheme.elements[i])) boxes.push_back({*b, scheme.elements[i].id});
    std::sort(boxes.begin(), boxes.end(), [](const auto& x, const auto& y) { return x.first.u0 < y.first.u0; });
    json overlaps = json::array();
    const double tu = 1e-12 * W.width(), ts = 1e-12 * W.height();
    std::vector<std::pair<Box, int>> active;
    for (const auto& [b, id] : boxes) {
      std::erase_if(active, [&](const auto& a) { return a.first.u1 <= b.u0 + tu; });
      for (const auto& [o, oid] : active)
        if (b.s0 < o.s1 - ts && o.s0 < b.s1 - ts && overlaps.size() < 20) overlaps.push_back({oid, id});
      active.push_back({b, id});
    }
    rep["I3"] = {{"elements_checked", boxes.size()},
                 {"overlaps", overlaps},
                 {"verdict", overlaps.empty() ? "pass" : "fail"}};
  }

  // (I4): a point of some element whose image lies in the same element.
  {
    json found = nullptr;
    for (const auto& e : els) {
      const Vec2 c = detail::box_center(e.box);
      auto [ua, ub] = detail::element_u_extent(a, c, e.word, opt.horizon);
      auto image_u = [&](double u) -> std::optional<double> {
        auto r = a.first_return(a.from_local({u, c.y}), opt.horizon, false);
        if (!r || r->word != e.word) return std::nullopt;
        return a.to_local(r->image)->x;
      };
      const double target = c.x;
      double lo = ua + 1e-12 * (ub - ua), hi = ub - 1e-12 * (ub - ua);
      auto flo = image_u(lo), fhi = image_u(hi);
      if (!flo || !fhi || (*flo - target) * (*fhi - target) > 0) continue;
      for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (lo + hi);
        auto fm = image_u(m);
        if (!fm) break;
        ((*fm - target) * (*flo - target) > 0 ? lo : hi) = m;
      }
      const double u = 0.5 * (lo + hi);
      auto r = a.first_return(a.from_local({u, c.y}), opt.horizon, false);
      if (r && a.in_base(r->image) && detail::word_at(a, *a.to_local(r->image), opt.horizon) == e.word) {
        found = {{"element", scheme.elements[static_cast<std::size_t>(e.index)].id}, {"point", {u, c.y}}};
        break;
      }
    }
    rep["I4"] = {{"witness", found}, {"verdict", found.is_null() ? "fail" : "pass"}};
  }
  return rep;
}

// Symbolic schemes: the induced map is the full shift over elements, so
// cylinders of length n have diameter 2^-n in the standard metric, distinct
// words are disjoint cylinders and every element carries a fixed point.
inline json validate_scheme(const InducingScheme& scheme) {
  scheme.validate();
  std::map<std::vector<int>, int> seen;
  json dup = json::array();
  for (const auto& e : scheme.elements) {
    if (e.word.empty()) continue;
    auto [it, fresh] = seen.emplace(e.word, e.id);
    if (!fresh) dup.push_back({it->second, e.id});
  }
  std::vector<double> d;
  for (int n = 1; n <= 8; ++n) d.push_back(std::ldexp(1.0, -n));
  return json{{"I1", {{"verdict", "pass"}, {"note", "full shift over elements"}}},
              {"I2", {{"diameters", d}, {"rate_median", 0.5}, {"verdict", "pass"}}},
              {"I3", {{"overlaps", dup}, {"verdict", dup.empty() ? "pass" : "fail"}}},
              {"I4", {{"witness", {{"element", scheme.elements.front().id}}}, {"verdict", "pass"}}}};
}

// ---------------------------------------------------------------------------
// (Y0)-(Y5)

struct YOptions {
  int samples = 16;
  int points = 32;
  int horizon = 64;
  double markov_tol = 1e-6;  // relative misalignment accepted in (Y1)
  int separation_cap = 8;
  std::uint64_t seed = 1;
};

inline json check_Y_conditions(const InducingScheme& scheme, const SmoothSystemAdapter& a, const YOptions& opt = {}) {
  json rep;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const Box W = a.base_box();
  const auto els = detail::sample_elements(scheme, opt.samples);

  // (Y0): leaf fraction of returning points on the central unstable leaf.
  {
    const int K = std::max(opt.points * 8, 64);
    int ret = 0;
    const double s = 0.5 * (W.s0 + W.s1);
    for (int k = 0; k < K; ++k) {
      const double u = W.u0 + (k + 0.5) / K * W.width();
      if (a.first_return(a.from_local({u, s}), opt.horizon, false)) ++ret;
    }
    const double frac = double(ret) / K;
    rep["Y0"] = {{"leaf_fraction", num(frac)}, {"verdict", frac > 0.0 ? "pass" : "fail"}};
  }
  if (els.empty()) {
    for (auto k : {"Y1", "Y3", "Y4"}) rep[k] = {{"verdict", "not evaluable"}, {"reason", "no element geometry"}};
  } else {
    double y1_err = 0.0;
    double alpha = 0.0, alpha_rate = 0.0;
    std::map<int, double> distortion;  // separation time -> max |log J^u F(x) - log J^u F(y)|
    for (const auto& e : els) {
      const Vec2 c = detail::box_center(e.box);
      auto [ua, ub] = detail::element_u_extent(a, c, e.word, opt.horizon);
      const double w = ub - ua;
      // (Y1): the u-extremes go to the u-boundaries of W.
      const double d = 1e-9 * w;
      auto ra = a.first_return(a.from_local({ua + d, c.y}), opt.horizon, false);
      auto rb = a.first_return(a.from_local({ub - d, c.y}), opt.horizon, false);
      if (ra && rb) {
        const double ia = a.to_local(ra->image)->x, ib = a.to_local(rb->image)->x;
        const double e1 = std::max(std::abs(ia - W.u0), std::abs(W.u1 - ib));
        const double e2 = std::max(std::abs(ib - W.u0), std::abs(W.u1 - ia));
        y1_err = std::max(y1_err, std::min(e1, e2) / W.width());
      } else {
        y1_err = kInf;
      }
      // (Y3): contraction along stable leaves, expansion along unstable leaves.
      for (int k = 0; k < opt.points / 2; ++k) {
        const double u = ua + (0.05 + 0.9 * U(rng)) * w;
        const double sa = W.s0 + (0.02 + 0.96 * U(rng)) * W.height(), sb = W.s0 + (0.02 + 0.96 * U(rng)) * W.height();
        auto rx = a.first_return(a.from_local({u, sa}), opt.horizon, false);
        auto ry = a.first_return(a.from_local({u, sb}), opt.horizon, false);
        if (rx && ry && rx->word == e.word && ry->word == e.word && std::abs(sa - sb) > 1e-6 * W.height()) {
          const double r = (*a.to_local(rx->image) - *a.to_local(ry->image)).norm() / std::abs(sa - sb);
          alpha = std::max(alpha, r);
          alpha_rate = std::max(alpha_rate, std::pow(r, 1.0 / e.tau));
        }
        const double u1 = ua + (0.05 + 0.9 * U(rng)) * w, u2 = ua + (0.05 + 0.9 * U(rng)) * w;
        auto px = a.first_return(a.from_local({u1, c.y}), opt.horizon, false);
        auto py = a.first_return(a.from_local({u2, c.y}), opt.horizon, false);
        if (px && py && std::abs(u1 - u2) > 1e-6 * w) {
          const double r = std::abs(u1 - u2) / (*a.to_local(px->image) - *a.to_local(py->image)).norm();
          alpha = std::max(alpha, r);
          alpha_rate = std::max(alpha_rate, std::pow(r, 1.0 / e.tau));
        }
      }
      // (Y4): distortion of log J^u F against the separation time.
      for (int k = 1; k <= 6; ++k) {
        const double u1 = ua + 0.5 * w * (1.0 - std::ldexp(1.0, -k)), u2 = ua + 0.5 * w * (1.0 + std::ldexp(1.0, -k));
        Vec2 x = a.from_local({u1, c.y}), y = a.from_local({u2, c.y});
        auto rx = a.first_return(x, opt.horizon, true), ry = a.first_return(y, opt.horizon, true);
        if (!rx || !ry || rx->word != ry->word) continue;
        const double D = std::abs(rx->log_ju - ry->log_ju);
        int sep = 1;
        Vec2 fx = rx->image, fy = ry->image;
        while (sep < opt.separation_cap) {
          auto qx = a.first_return(fx, opt.horizon, false), qy = a.first_return(fy, opt.horizon, false);
          if (!qx || !qy || qx->word != qy->word) break;
          ++sep;
          fx = qx->image;
          fy = qy->image;
        }
        distortion[sep] = std::max(distortion[sep], D);
      }
    }
    rep["Y1"] = {{"max_misalignment", num(y1_err)}, {"tolerance", opt.markov_tol},
                 {"verdict", y1_err <= opt.markov_tol ? "pass" : "fail"}};
    rep["Y3"] = {{"alpha_hat", num(alpha)}, {"alpha_per_step", num(alpha_rate)},
                 {"verdict", alpha > 0.0 && alpha < 1.0 ? "pass" : "fail"}};
    std::vector<double> xs, ys;
    double dmax = 0.0;
    json table = json::array();
    for (const auto& [s, D] : distortion) {
      table.push_back({s, num(D)});
      dmax = std::max(dmax, D);
      if (D > 1e-12) {
        xs.push_back(s);
        ys.push_back(std::log(D));
      }
    }
    json y4{{"by_separation", table}};
    if (dmax <= 1e-12) {
      y4["c"] = 0.0;
      y4["beta"] = 0.0;
      y4["verdict"] = "pass";
      y4["note"] = "distortion-free at sampled resolution";
    } else if (xs.size() >= 2) {
      const double sl = ls_slope(xs, ys);
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i] / xs.size();
        my += ys[i] / xs.size();
      }
      y4["c"] = num(std::exp(my - sl * mx));
      y4["beta"] = num(std::exp(sl));
      y4["verdict"] = std::exp(sl) < 1.0 ? "pass" : "fail";
    } else {
      y4["c"] = num(dmax);
      y4["verdict"] = "inconclusive";
    }
    rep["Y4"] = y4;
  }

  // (Y5): tau-weighted reference masses per shell.
  {
    const int T = scheme.max_tau();
    std::vector<LogSum> acc(static_cast<std::size_t>(T));
    bool have = false;
    for (const auto& e : scheme.elements)
      if (std::isfinite(e.mass) && e.mass > 0.0) {
        acc[static_cast<std::size_t>(e.tau - 1)].add(std::log(e.tau * e.mass));
        have = true;
      }
    if (!have) {
      rep["Y5"] = {{"verdict", "not evaluable"}, {"reason", "no element masses"}};
    } else {
      std::vector<double> lt;
      for (const auto& x : acc) lt.push_back(x.value());
      rep["Y5"] = ratio_test(lt, T).to_json();
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// (L1)

struct L1Report {
  int l = -1, N = -1;
  bool pass = false;
  int elements_checked = 0;
  std::vector<std::pair<int, double>> worst;  // per l: (l, max diameter in the window)
  json to_json() const {
    json w = json::array();
    for (const auto& [l_, d] : worst) w.push_back({l_, num(d)});
    return json{{"l", l}, {"N", N}, {"verdict", pass ? "pass" : "fail"}, {"elements_checked", elements_checked},
                {"window_max_diameter", w}};
  }
};

// Sampled diameters of f^k(J); windows k = floor(l/2) .. tau - floor(l/2) - 1 and N = l + 1.
inline L1Report check_L1(const InducingScheme& scheme, const SmoothSystemAdapter& a, double eps, int l_max = 20,
                         int samples = 24) {
  L1Report r;
  const auto els = detail::sample_elements(scheme, samples);
  TT_REQUIRE(!els.empty(), PreconditionError, "check_L1 needs element geometry");
  std::vector<std::pair<int, std::vector<double>>> diams;
  for (const auto& e : els) {
    std::vector<Vec2> pts;
    for (double fu : {0.0, 0.5, 1.0})
      for (double fs : {0.0, 0.5, 1.0}) {
        const double u = e.box.u0 + (1e-9 + fu * (1 - 2e-9)) * e.box.width();
        const double s = e.box.s0 + (1e-9 + fs * (1 - 2e-9)) * e.box.height();
        pts.push_back(a.from_local({u, s}));
      }
    std::vector<double> d;
    for (int k = 0; k < e.tau; ++k) {
      double m = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) m = std::max(m, torus_distance(pts[i], pts[j]));
      d.push_back(m);
      for (auto& p : pts) p = a.f(p);
    }
    diams.push_back({e.tau, std::move(d)});
  }
  r.elements_checked = static_cast<int>(diams.size());
  for (int l = 0; l <= l_max; ++l) {
    const int N = l + 1, h = l / 2;
    double worst = 0.0;
    int used = 0;
    for (const auto& [tau, d] : diams) {
      if (tau <= N) continue;
      ++used;
      for (int k = h; k <= tau - h - 1; ++k) worst = std::max(worst, d[static_cast<std::size_t>(k)]);
    }
    if (used == 0) break;
    r.worst.push_back({l, worst});
    if (worst < eps) {
      r.l = l;
      r.N = N;
      r.pass = true;
      break;
    }
  }
  return r;
}

}  // namespace tower_thermo
