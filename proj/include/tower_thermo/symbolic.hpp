#pragma once

// First-return inducing schemes of a subshift of finite type to a base symbol.
//
// Elements are the words p c_1 ... c_{n-1} with c_i != p that can be followed
// by p; tau = n. Words up to `explicit_horizon` are listed one by one, longer
// return times are kept as one class per n with multiplicity S_n.

#include <string>
#include <vector>

#include "tower_thermo/tower.hpp"

namespace tower_thermo {

struct SFT {
  std::vector<std::vector<int>> B;  // 0/1 adjacency

  explicit SFT(std::vector<std::vector<int>> adj) : B(std::move(adj)) {
    TT_REQUIRE(!B.empty(), InvalidInput, "adjacency matrix must be non-empty");
    for (const auto& row : B) {
      TT_REQUIRE(row.size() == B.size(), InvalidInput, "adjacency matrix must be square");
      for (int x : row) TT_REQUIRE(x == 0 || x == 1, InvalidInput, "adjacency entries must be 0 or 1");
    }
  }
  static SFT full(int N) { return SFT(std::vector<std::vector<int>>(static_cast<std::size_t>(N), std::vector<int>(static_cast<std::size_t>(N), 1))); }
  int size() const { return static_cast<int>(B.size()); }
  bool allowed(int a, int b) const { return B[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] == 1; }
};

// S_n for n = 1..horizon from the transfer matrix of the SFT with p removed:
// S_1 = B_pp, S_n = B_{p,c} B_cc^{n-2} B_{c,p}.
inline std::vector<double> first_return_counts(const SFT& sft, int p, int horizon) {
  const int N = sft.size();
  TT_REQUIRE(p >= 0 && p < N, InvalidInput, "base symbol outside alphabet");
  std::vector<double> out;
  out.push_back(sft.allowed(p, p) ? 1.0 : 0.0);
  std::vector<double> v(static_cast<std::size_t>(N), 0.0), nxt(static_cast<std::size_t>(N));
  for (int c = 0; c < N; ++c)
    if (c != p && sft.allowed(p, c)) v[static_cast<std::size_t>(c)] = 1.0;
  for (int n = 2; n <= horizon; ++n) {
    double s = 0.0;
    for (int c = 0; c < N; ++c)
      if (c != p && sft.allowed(c, p)) s += v[static_cast<std::size_t>(c)];
    out.push_back(s);
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (int a = 0; a < N; ++a)
      if (a != p && v[static_cast<std::size_t>(a)] != 0.0)
        for (int b = 0; b < N; ++b)
          if (b != p && sft.allowed(a, b)) nxt[static_cast<std::size_t>(b)] += v[static_cast<std::size_t>(a)];
    v.swap(nxt);
  }
  return out;
}

// Callback receives each explicit word (starting with p, without the closing p).
template <class Visit>
void enumerate_first_returns(const SFT& sft, int p, int max_len, Visit&& visit) {
  std::vector<int> w{p};
  std::function<void()> rec = [&] {
    const int last = w.back();
    if (sft.allowed(last, p)) visit(w);
    if (static_cast<int>(w.size()) == max_len) return;
    for (int c = 0; c < sft.size(); ++c)
      if (c != p && sft.allowed(last, c)) {
        w.push_back(c);
        rec();
        w.pop_back();
      }
  };
  rec();
}

inline InducingScheme first_return_scheme(const SFT& sft, int p, int horizon, int explicit_horizon,
                                          double max_explicit = 2e5) {
  TT_REQUIRE(horizon >= 1 && explicit_horizon >= 0 && explicit_horizon <= horizon, InvalidInput,
             "need 0 <= explicit_horizon <= horizon");
  const auto S = first_return_counts(sft, p, horizon);
  double listed = 0.0;
  for (int n = 1; n <= explicit_horizon; ++n) listed += S[static_cast<std::size_t>(n - 1)];
  TT_REQUIRE(listed <= max_explicit, ResourceError, "too many explicit first-return words");
  InducingScheme s;
  s.kind = "symbolic";
  s.horizon = horizon;
  enumerate_first_returns(sft, p, explicit_horizon, [&](const std::vector<int>& w) {
    SchemeElement e;
    e.id = s.size();
    e.tau = static_cast<int>(w.size());
    e.word = w;
    s.elements.push_back(std::move(e));
  });
  for (int n = explicit_horizon + 1; n <= horizon; ++n) {
    const double m = S[static_cast<std::size_t>(n - 1)];
    if (m <= 0.0) continue;
    SchemeElement e;
    e.id = s.size();
    e.tau = n;
    e.multiplicity = m;
    s.elements.push_back(std::move(e));
  }
  s.meta = json{{"construction", "sft_first_return"}, {"base_symbol", p}, {"explicit_horizon", explicit_horizon},
                {"S_n", S}};
  TT_REQUIRE(!s.elements.empty(), PreconditionError, "no first returns within the horizon");
  return s;
}

}  // namespace tower_thermo
