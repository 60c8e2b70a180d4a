#pragma once

// The automorphism T = [[2,1],[1,1]] of the torus, a Markov partition into
// rectangles in eigencoordinates (u along the expanding direction, s along
// the contracting one), the coding SFT, and the first-return inducing scheme
// to one rectangle.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tower_thermo/smooth.hpp"
#include "tower_thermo/symbolic.hpp"

namespace tower_thermo {

struct CatMap {
  double lambda = (3.0 + std::sqrt(5.0)) / 2.0;
  Vec2 eu, es;  // unit eigenvectors for lambda and 1/lambda

  CatMap() {
    eu = Vec2{1.0, lambda - 2.0} * (1.0 / Vec2{1.0, lambda - 2.0}.norm());
    es = Vec2{1.0, 1.0 / lambda - 2.0} * (1.0 / Vec2{1.0, 1.0 / lambda - 2.0}.norm());
  }
  double log_lambda() const { return std::log(lambda); }

  Vec2 apply(Vec2 p) const { return wrap({2 * p.x + p.y, p.x + p.y}); }
  Vec2 inverse(Vec2 p) const { return wrap({p.x - p.y, -p.x + 2 * p.y}); }
  // Plane maps, no wrapping.
  Vec2 linear(Vec2 p) const { return {2 * p.x + p.y, p.x + p.y}; }

  Vec2 to_eigen(Vec2 d) const { return {d.dot(eu), d.dot(es)}; }
  Vec2 from_eigen(Vec2 s) const { return eu * s.x + es * s.y; }

  json self_test() const {
    const double det = 2.0 * 1.0 - 1.0 * 1.0;
    const Vec2 te = linear(eu);
    return json{{"det", det},
                {"lambda", num(lambda)},
                {"lambda_times_inverse", num(lambda * (1.0 / lambda))},
                {"eigen_residual", num((te - eu * lambda).norm())},
                {"orthogonality", num(eu.dot(es))}};
  }
};

struct PartitionRect {
  double u0, u1, s0, s1;
  bool contains(Vec2 e) const { return e.x >= u0 && e.x < u1 && e.y >= s0 && e.y < s1; }
  double width() const { return u1 - u0; }
};

// Under T, rect k sends its u-subinterval [a, b] across rect j; on it
// u' = lambda u - cu and s' = s / lambda - cs.
struct Branch {
  int to;
  double a, b, cu, cs;
};

class MarkovPartition {
 public:
  MarkovPartition(const CatMap& T, std::vector<PartitionRect> rects) : T_(T), rects_(std::move(rects)) {
    TT_REQUIRE(!rects_.empty(), InvalidInput, "partition needs rectangles");
    v1_ = T_.to_eigen({1.0, 0.0});
    v2_ = T_.to_eigen({0.0, 1.0});
    for (int n1 = -3; n1 <= 3; ++n1)
      for (int n2 = -3; n2 <= 3; ++n2) shifts_.push_back({n1, n2});
    std::stable_sort(shifts_.begin(), shifts_.end(),
                     [](auto a, auto b) { return std::abs(a[0]) + std::abs(a[1]) < std::abs(b[0]) + std::abs(b[1]); });
    derive_branches();
  }

  // Adler-Weiss tiling by two squares cut into five rectangles along the
  // preimages of the stable boundaries.
  static MarkovPartition standard(const CatMap& T = CatMap()) {
    const Vec2 v1 = T.to_eigen({1.0, 0.0}), v2 = T.to_eigen({0.0, -1.0});
    const double wA = v1.x, hA = v2.y, wB = -v2.x, hB = v1.y;
    const double c = wA - wB;  // = wA / lambda
    return MarkovPartition(T, {{0.0, c, 0.0, hA},
                               {c, wB, 0.0, hA},
                               {wB, wA, 0.0, hA},
                               {wA, wA + (wB - c), 0.0, hB},
                               {wA + (wB - c), wA + wB, 0.0, hB}});
  }

  static MarkovPartition from_json(const json& j, const CatMap& T = CatMap()) {
    if (j.is_string() && j.get<std::string>() == "standard") return standard(T);
    TT_REQUIRE(j.is_object() && j.contains("rectangles"), InvalidInput, "partition descriptor needs rectangles");
    for (auto it = j.begin(); it != j.end(); ++it)
      TT_REQUIRE(it.key() == "rectangles", InvalidInput, "unknown key '" + it.key() + "' in partition descriptor");
    std::vector<PartitionRect> r;
    for (const auto& x : j.at("rectangles")) {
      const auto u = x.at("u").get<std::vector<double>>();
      const auto s = x.at("s").get<std::vector<double>>();
      r.push_back({u.at(0), u.at(1), s.at(0), s.at(1)});
    }
    return MarkovPartition(T, std::move(r));
  }

  json to_json() const {
    json r = json::array();
    for (const auto& x : rects_) r.push_back({{"u", {x.u0, x.u1}}, {"s", {x.s0, x.s1}}});
    return json{{"rectangles", r}};
  }

  int size() const { return static_cast<int>(rects_.size()); }
  const PartitionRect& rect(int k) const { return rects_[static_cast<std::size_t>(k)]; }
  const std::vector<Branch>& branches(int k) const { return branches_[static_cast<std::size_t>(k)]; }
  const SFT& sft() const { return *sft_; }
  const CatMap& cat() const { return T_; }

  // Symbol and eigencoordinates of the representative of a torus point.
  std::pair<int, Vec2> locate(Vec2 p) const {
    for (const auto& n : shifts_) {
      const Vec2 e = T_.to_eigen({p.x + n[0], p.y + n[1]});
      for (int k = 0; k < size(); ++k)
        if (rects_[static_cast<std::size_t>(k)].contains(e)) return {k, e};
    }
    // rounding can push boundary points out of every half-open rectangle
    for (const auto& n : shifts_) {
      const Vec2 e = T_.to_eigen({p.x + n[0], p.y + n[1]});
      for (int k = 0; k < size(); ++k) {
        const auto& R = rects_[static_cast<std::size_t>(k)];
        const double t = 1e-9;
        if (e.x >= R.u0 - t && e.x < R.u1 + t && e.y >= R.s0 - t && e.y < R.s1 + t)
          return {k, {std::clamp(e.x, R.u0, std::nextafter(R.u1, R.u0)), std::clamp(e.y, R.s0, std::nextafter(R.s1, R.s0))}};
      }
    }
    throw NumericalError("point not covered by the partition");
  }
  Vec2 to_torus(Vec2 e) const { return wrap(T_.from_eigen(e)); }

  // Symbolic first return from a u-coordinate in rect k: iterate the 1D branch map.
  std::optional<int> symbolic_return(int k, double u, int target, int horizon) const {
    for (int n = 1; n <= horizon; ++n) {
      const Branch* br = nullptr;
      for (const auto& b : branches(k))
        if (u >= b.a && u < b.b) br = &b;
      if (!br) return std::nullopt;
      u = T_.lambda * u - br->cu;
      k = br->to;
      if (k == target) return n;
    }
    return std::nullopt;
  }

  json self_test() const { return self_test_; }

 private:
  void derive_branches() {
    const double lam = T_.lambda;
    branches_.assign(rects_.size(), {});
    std::vector<std::vector<int>> B(rects_.size(), std::vector<int>(rects_.size(), 0));
    double tiling_gap = 0.0, s_overflow = 0.0;
    for (int k = 0; k < size(); ++k) {
      const auto& R = rect(k);
      const int M = 4000;
      const double s_mid = 0.5 * (R.s0 + R.s1);
      int cur = -1;
      std::vector<Branch> out;
      for (int i = 0; i < M; ++i) {
        const double u = R.u0 + (i + 0.5) / M * R.width();
        const Vec2 img = to_torus({lam * u, s_mid / lam});
        const auto [j, e] = locate(img);
        if (j != cur) {
          const double cu = lam * u - e.x, cs = s_mid / lam - e.y;
          const auto& Rj = rect(j);
          out.push_back({j, (Rj.u0 + cu) / lam, (Rj.u1 + cu) / lam, cu, cs});
          cur = j;
        }
      }
      double at = R.u0;
      for (auto& br : out) {
        tiling_gap = std::max(tiling_gap, std::abs(br.a - at));
        at = br.b;
        TT_REQUIRE(B[static_cast<std::size_t>(k)][static_cast<std::size_t>(br.to)] == 0, InvalidInput,
                   "partition is not Markov: rect " + std::to_string(k) + " crosses rect " + std::to_string(br.to) +
                       " twice");
        B[static_cast<std::size_t>(k)][static_cast<std::size_t>(br.to)] = 1;
        const auto& Rj = rect(br.to);
        const double lo = R.s0 / lam - br.cs, hi = R.s1 / lam - br.cs;
        s_overflow = std::max({s_overflow, Rj.s0 - lo, hi - Rj.s1});
      }
      tiling_gap = std::max(tiling_gap, std::abs(at - R.u1));
      branches_[static_cast<std::size_t>(k)] = std::move(out);
    }
    area_ = 0.0;
    for (const auto& R : rects_) area_ += R.width() * (R.s1 - R.s0);
    self_test_ = json{{"area", num(area_)}, {"u_tiling_gap", num(tiling_gap)}, {"s_overflow", num(s_overflow)}};
    TT_REQUIRE(std::abs(area_ - 1.0) < 1e-9, InvalidInput, "partition rectangles must have total area 1");
    TT_REQUIRE(tiling_gap < 1e-9, InvalidInput, "partition is not Markov: images do not cross whole rectangles");
    TT_REQUIRE(s_overflow < 1e-9, InvalidInput, "partition is not Markov: stable sides do not map inside");
    sft_.emplace(std::move(B));
  }

  CatMap T_;
  std::vector<PartitionRect> rects_;
  Vec2 v1_, v2_;
  std::vector<std::array<int, 2>> shifts_;
  std::vector<std::vector<Branch>> branches_;
  std::optional<SFT> sft_;
  json self_test_;
  double area_ = 0.0;
};

// A torus map coded by a Markov partition of T, first returns to a base
// rectangle (by default a partition element, optionally a sub-box of it).
class TorusPartitionAdapter : public SmoothSystemAdapter {
 public:
  TorusPartitionAdapter(MarkovPartition part, int base, std::optional<Box> box = std::nullopt)
      : part_(std::move(part)), base_(base) {
    TT_REQUIRE(base >= 0 && base < part_.size(), InvalidInput, "base symbol outside partition");
    const auto& R = part_.rect(base);
    box_ = box.value_or(Box{R.u0, R.u1, R.s0, R.s1});
  }

  Box base_box() const override { return box_; }
  int base_symbol() const { return base_; }
  const MarkovPartition& partition() const { return part_; }
  Vec2 from_local(Vec2 us) const override { return part_.to_torus(us); }
  std::optional<Vec2> to_local(Vec2 x) const override {
    const auto [k, e] = part_.locate(x);
    if (k != base_ || !box_.contains(e)) return std::nullopt;
    return e;
  }
  int symbol(Vec2 x) const override { return part_.locate(x).first; }

 protected:
  MarkovPartition part_;
  int base_;
  Box box_;
};

class CatMapAdapter : public TorusPartitionAdapter {
 public:
  using TorusPartitionAdapter::TorusPartitionAdapter;
  std::string name() const override { return "cat_map"; }
  Vec2 f(Vec2 x) const override { return T().apply(x); }
  Vec2 f_inv(Vec2 x) const override { return T().inverse(x); }
  Vec2 unstable_direction(Vec2) const override { return T().eu; }
  double log_ju_step(Vec2, Vec2& v) const override {
    const Vec2 w = T().linear(v);
    const double n = w.norm();
    v = w * (1.0 / n);
    return std::log(n);
  }

 private:
  const CatMap& T() const { return part_.cat(); }
};

// Element base symbol: the rectangle of the standard partition farthest from the origin.
inline constexpr int kCatBaseSymbol = 1;

// First-return scheme of T to rect p: explicit words (with exact u-intervals,
// leaf mass lambda^-n and log J^u F = n log lambda) up to explicit_horizon,
// one class per tau beyond, up to horizon.
inline InducingScheme cat_first_return_scheme(const MarkovPartition& part, int p, int horizon, int explicit_horizon) {
  const auto& sft = part.sft();
  const double lam = part.cat().lambda, ll = std::log(lam);
  auto s = first_return_scheme(sft, p, horizon, explicit_horizon);
  s.kind = "smooth";
  const auto& P = part.rect(p);
  // u-interval of the cylinder w_0 ... w_{n-1} p, pulled back from [P.u0, P.u1].
  auto interval = [&](const std::vector<int>& w) {
    double lo = P.u0, hi = P.u1;
    for (int k = static_cast<int>(w.size()) - 1; k >= 0; --k) {
      const int to = k + 1 < static_cast<int>(w.size()) ? w[static_cast<std::size_t>(k + 1)] : p;
      const Branch* br = nullptr;
      for (const auto& b : part.branches(w[static_cast<std::size_t>(k)]))
        if (b.to == to) br = &b;
      TT_REQUIRE(br, NumericalError, "word not allowed by the partition");
      lo = (lo + br->cu) / lam;
      hi = (hi + br->cu) / lam;
    }
    return std::pair{lo, hi};
  };
  for (auto& e : s.elements) {
    e.log_ju = e.tau * ll;
    e.mass = e.multiplicity * std::pow(lam, -e.tau);
    if (!e.word.empty()) {
      const auto [lo, hi] = interval(e.word);
      e.geometry = json{{"u", {lo, hi}}, {"s", {P.s0, P.s1}}};
    }
  }
  double found = 0.0;
  for (const auto& e : s.elements) found += e.mass;
  s.residual_mass = std::max(0.0, 1.0 - found);
  s.meta["construction"] = "cat_first_return";
  s.meta["partition"] = part.to_json();
  return s;
}

struct TauCrossCheck {
  long cells = 0, agree = 0, both_missing = 0;
  double fraction = 0.0;
  json to_json() const {
    return json{{"cells", cells}, {"agree", agree}, {"both_missing", both_missing}, {"agreement", num(fraction)}};
  }
};

// tau from torus orbits versus the 1D symbolic branch map on an nx-by-ny grid of P.
inline TauCrossCheck cat_tau_cross_check(const MarkovPartition& part, int p, int nx, int ny, int horizon) {
  const CatMapAdapter A(part, p);
  const auto& P = part.rect(p);
  TauCrossCheck r;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const Vec2 us{P.u0 + (i + 0.5) / nx * P.width(), P.s0 + (j + 0.5) / ny * (P.s1 - P.s0)};
      auto orbit = A.first_return(A.from_local(us), horizon, false);
      auto sym = part.symbolic_return(p, us.x, p, horizon);
      ++r.cells;
      if (!orbit && !sym) {
        ++r.both_missing;
        ++r.agree;
      } else if (orbit && sym && orbit->tau == *sym) {
        ++r.agree;
      }
    }
  r.fraction = double(r.agree) / r.cells;
  return r;
}

}  // namespace tower_thermo
