#pragma once

// Bowen reduction: for a two-sided Phi with summable variations build
//   u(a)   = sum_{j>=0} Phi(s^j a) - Phi(s^j r(a))
//   Psi(a) = Phi(a) + u(s a) - u(a)
// where r(a) keeps a_k for k >= 0 and substitutes a fixed past.
//
// Psi is evaluated in the regrouped form
//   Psi(a) = Phi(r a) + sum_{j=0}^{J} [Phi(s^{j+1} r a) - Phi(s^j r s a)],
// whose j-th term is bounded by V_{j+1}(Phi), so truncation at J leaves
// at most sum_{j>J} V_{j+1}(Phi).

#include <cmath>
#include <limits>

#include "tower_thermo/shift.hpp"

namespace tower_thermo {

struct CoboundaryData {
  int J = 0;
  double tail_bound = 0.0;
  bool heuristic = false;
};

struct UValue {
  double value = 0.0;
  double error_bound = 0.0;
};

inline double bowen_tail(const Potential& phi, int J) {
  if (const auto* b = phi.block(); b && J + 1 >= -b->first) return 0.0;
  return phi.variation_tail(J + 2);
}

inline CoboundaryData coboundary_data(const Potential& phi, int J) {
  TT_REQUIRE(J >= 1, InvalidInput, "truncation J must be >= 1");
  const double t = bowen_tail(phi, J);
  TT_REQUIRE(std::isfinite(t), PreconditionError, "declared variations are not summable");
  return {J, t, phi.bound().heuristic_tail() && t > 0.0};
}

// Smallest J whose tail bound is below tol.
inline int default_truncation(const Potential& phi, double tol = 1e-10, int J_max = 100000) {
  if (const auto* b = phi.block(); b) return std::max(1, -b->first - 1);
  TT_REQUIRE(std::isfinite(phi.variation_tail(1)), PreconditionError, "declared variations are not summable");
  for (int J = 1; J <= J_max; ++J)
    if (phi.variation_tail(J + 2) < tol) return J;
  throw PreconditionError("variation tail does not fall below tolerance");
}

inline UValue compute_u(const Potential& phi, const ReferenceFill& fill, const Sequence& a, int J) {
  fill.validate(Alphabet(phi.alphabet_size()));
  const auto data = coboundary_data(phi, J);
  const Sequence ra = a.with_past(fill);
  double s = 0.0;
  for (int j = 0; j <= J; ++j) s += phi(a.shifted(j)) - phi(ra.shifted(j));
  return {s, data.tail_bound};
}

namespace detail {

inline double reduced_eval(const Potential& phi, const ReferenceFill& fill, const Sequence& a, int J) {
  const Sequence ra = a.with_past(fill);
  const Sequence rsa = a.shifted(1).with_past(fill);
  double s = phi(ra);
  for (int j = 0; j <= J; ++j) s += phi(ra.shifted(j + 1)) - phi(rsa.shifted(j));
  return s;
}

}  // namespace detail

inline Potential reduce_to_one_sided(const Potential& phi, const ReferenceFill& fill, int J) {
  fill.validate(Alphabet(phi.alphabet_size()));
  const auto data = coboundary_data(phi, J);

  auto base = std::make_shared<const Potential>(phi);
  auto f = std::make_shared<const ReferenceFill>(fill);
  auto psi_bound = VariationBound::function(
      [base](int n) {
        return base->variation(n) + 8.0 * base->variation_tail(std::max(1, (n - 2) / 2));
      },
      "V_n(base) + 8 * tail(floor((n-2)/2))");
  json desc{{"kind", "reduced"},
            {"base", phi.descriptor()},
            {"fill", fill.symbols},
            {"J", J},
            {"tail_bound", data.tail_bound},
            {"tail_heuristic", data.heuristic}};

  if (const auto* b = phi.block()) {
    if (b->first >= 0) return phi;
    // Terms with j >= -first vanish, so Psi reads only a_0 .. a_{length-1}.
    const int len = b->length;
    const int Jeff = std::min(J, -b->first - 1);
    BlockForm form{0, len, [base, f, Jeff](std::span<const int> w) {
                     const Sequence a = Sequence::windowed(Word{std::vector<int>(w.begin(), w.end()), 0});
                     return detail::reduced_eval(*base, *f, a, Jeff);
                   }};
    return Potential::block(phi.alphabet_size(), std::move(form), psi_bound, desc);
  }
  if (phi.one_sided()) return phi;
  return Potential::general(
      phi.alphabet_size(), [base, f, J](const Sequence& a) { return detail::reduced_eval(*base, *f, a, J); },
      psi_bound, true, desc);
}

// |Phi_n(a) - Psi_n(a)| over one full period.
inline double periodic_cohomology_check(const Potential& phi, const Potential& psi, const PeriodicSequence& a) {
  const int n = a.period();
  return std::abs(birkhoff_sum(phi, a, n) - birkhoff_sum(psi, a, n));
}

}  // namespace tower_thermo
