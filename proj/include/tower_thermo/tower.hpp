#pragma once

// Inducing schemes over a countable (truncated) family of base elements,
// induced and normalized potentials, the liftable pressure, the lift of an
// induced measure to the tower, and Abramov/Kac bookkeeping.
//
// The induced map is a full shift over elements. An element with
// multiplicity m stands for m elements sharing tau and the induced values.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tower_thermo/gibbs.hpp"
#include "tower_thermo/pressure.hpp"
#include "tower_thermo/util.hpp"

namespace tower_thermo {

struct SchemeElement {
  int id = 0;
  int tau = 1;
  double multiplicity = 1.0;
  bool first_return = true;
  std::vector<int> word;  // itinerary in the underlying coding, if known
  double log_ju = std::numeric_limits<double>::quiet_NaN();  // log J^u F, if known
  double mass = std::numeric_limits<double>::quiet_NaN();    // reference measure of the element (all copies)
  json geometry;                                             // adapter-specific description
};

struct InducingScheme {
  std::string kind = "symbolic";
  std::vector<SchemeElement> elements;
  int horizon = 0;
  double residual_mass = 0.0;  // reference mass with no return within the horizon
  json meta = json::object();

  int size() const { return static_cast<int>(elements.size()); }
  std::vector<double> multiplicities() const {
    std::vector<double> m;
    for (const auto& e : elements) m.push_back(e.multiplicity);
    return m;
  }
  std::vector<int> taus() const {
    std::vector<int> t;
    for (const auto& e : elements) t.push_back(e.tau);
    return t;
  }
  int max_tau() const {
    int t = 0;
    for (const auto& e : elements) t = std::max(t, e.tau);
    return t;
  }
  // Total multiplicity per tau (index n = tau).
  std::vector<double> shell_counts() const {
    std::vector<double> s(static_cast<std::size_t>(max_tau() + 1), 0.0);
    for (const auto& e : elements) s[static_cast<std::size_t>(e.tau)] += e.multiplicity;
    return s;
  }

  void validate() const {
    TT_REQUIRE(kind == "symbolic" || kind == "smooth", InvalidInput, "scheme kind must be symbolic or smooth");
    TT_REQUIRE(!elements.empty(), InvalidInput, "scheme has no elements");
    for (const auto& e : elements) {
      TT_REQUIRE(e.tau >= 1, InvalidInput, "element " + std::to_string(e.id) + " has tau < 1");
      TT_REQUIRE(e.multiplicity > 0.0 && std::isfinite(e.multiplicity), InvalidInput,
                 "element " + std::to_string(e.id) + " has invalid multiplicity");
    }
  }

  json to_json() const {
    json els = json::array();
    for (const auto& e : elements) {
      json j{{"id", e.id}, {"tau", e.tau}, {"first_return", e.first_return}};
      if (e.multiplicity != 1.0) j["multiplicity"] = e.multiplicity;
      if (!e.word.empty()) j["word"] = e.word;
      if (std::isfinite(e.log_ju)) j["log_ju"] = e.log_ju;
      if (std::isfinite(e.mass)) j["mass"] = e.mass;
      if (!e.geometry.is_null()) j["geometry"] = e.geometry;
      els.push_back(j);
    }
    return json{{"kind", kind}, {"elements", els}, {"horizon", horizon}, {"residual_mass", residual_mass}, {"meta", meta}};
  }

  static InducingScheme from_json(const json& j) {
    TT_REQUIRE(j.is_object(), InvalidInput, "scheme descriptor must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
      TT_REQUIRE(it.key() == "kind" || it.key() == "elements" || it.key() == "horizon" || it.key() == "residual_mass" ||
                     it.key() == "meta",
                 InvalidInput, "unknown key '" + it.key() + "' in scheme descriptor");
    InducingScheme s;
    s.kind = j.value("kind", std::string("symbolic"));
    s.horizon = j.value("horizon", 0);
    s.residual_mass = j.value("residual_mass", 0.0);
    s.meta = j.value("meta", json::object());
    TT_REQUIRE(j.contains("elements") && j.at("elements").is_array(), InvalidInput, "scheme needs an elements array");
    for (const auto& e : j.at("elements")) {
      for (auto it = e.begin(); it != e.end(); ++it) {
        static const std::vector<std::string> keys{"id", "tau", "first_return", "multiplicity", "word",
                                                   "log_ju", "mass", "geometry"};
        TT_REQUIRE(std::find(keys.begin(), keys.end(), it.key()) != keys.end(), InvalidInput,
                   "unknown key '" + it.key() + "' in scheme element");
      }
      SchemeElement x;
      x.id = e.value("id", static_cast<int>(s.elements.size()));
      x.tau = e.at("tau").get<int>();
      x.first_return = e.value("first_return", true);
      x.multiplicity = e.value("multiplicity", 1.0);
      if (e.contains("word")) x.word = e.at("word").get<std::vector<int>>();
      if (e.contains("log_ju")) x.log_ju = e.at("log_ju").get<double>();
      if (e.contains("mass")) x.mass = e.at("mass").get<double>();
      if (e.contains("geometry")) x.geometry = e.at("geometry");
      s.elements.push_back(std::move(x));
    }
    if (s.horizon == 0) s.horizon = s.max_tau();
    s.validate();
    return s;
  }

  // Elements with equal (tau, induced value key) merged into classes; the
  // key function returns the value that must agree (e.g. log_ju).
  InducingScheme classes(const std::function<double(const SchemeElement&)>& key, double rel_tol = 1e-12) const {
    InducingScheme out;
    out.kind = kind;
    out.horizon = horizon;
    out.residual_mass = residual_mass;
    out.meta = meta;
    std::map<int, std::vector<std::size_t>> by_tau;
    for (std::size_t i = 0; i < elements.size(); ++i) by_tau[elements[i].tau].push_back(i);
    for (const auto& [tau, idx] : by_tau) {
      std::vector<SchemeElement> reps;
      for (std::size_t i : idx) {
        const auto& e = elements[i];
        const double k = key(e);
        auto it = std::find_if(reps.begin(), reps.end(), [&](const SchemeElement& r) {
          const double kr = key(r);
          return std::abs(kr - k) <= rel_tol * std::max(1.0, std::abs(k));
        });
        if (it == reps.end()) {
          SchemeElement r = e;
          r.id = 0;
          r.word.clear();
          r.geometry = nullptr;
          reps.push_back(r);
        } else {
          it->multiplicity += e.multiplicity;
          if (std::isfinite(it->mass) && std::isfinite(e.mass)) it->mass += e.mass;
          it->first_return = it->first_return && e.first_return;
        }
      }
      for (auto& r : reps) {
        r.id = static_cast<int>(out.elements.size());
        out.elements.push_back(std::move(r));
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Induced potentials

struct InducedValues {
  std::vector<double> value;  // representative phi-bar per element
  std::vector<double> sup;    // sampled sup of phi-bar per element
  double variation = 0.0;     // max sampled spread within an element
};

// Full shift over the scheme's elements with a one-block potential.
inline Potential induced_one_block(const InducingScheme& s, const std::vector<double>& values, json descriptor = {}) {
  TT_REQUIRE(static_cast<int>(values.size()) == s.size(), InvalidInput, "one value per element required");
  auto v = std::make_shared<const std::vector<double>>(values);
  if (descriptor.is_null()) descriptor = json{{"kind", "induced"}, {"elements", s.size()}};
  return Potential::block(s.size(), BlockForm{0, 1, [v](std::span<const int> w) { return (*v)[static_cast<std::size_t>(w[0])]; }},
                          VariationBound::zero(), descriptor);
}

// phi-bar(J) = c * tau(J).
inline InducedValues induce_constant(const InducingScheme& s, double c) {
  InducedValues r;
  for (const auto& e : s.elements) {
    r.value.push_back(c * e.tau);
    r.sup.push_back(c * e.tau);
  }
  return r;
}

// phi_t-bar(J) = -t * log J^u F(J), using the recorded Jacobians.
inline InducedValues induce_geometric(const InducingScheme& s, double t) {
  InducedValues r;
  for (const auto& e : s.elements) {
    TT_REQUIRE(std::isfinite(e.log_ju), PreconditionError, "element " + std::to_string(e.id) + " has no log_ju");
    r.value.push_back(-t * e.log_ju);
    r.sup.push_back(-t * e.log_ju);
  }
  return r;
}

// Induced potential of a one-sided base-shift potential: the element words of
// the symbols a_0 a_1 ... are concatenated and phi is summed over tau(a_0) steps.
inline Potential induce_symbolic(const Potential& phi, const InducingScheme& s, int tail_elements = 4) {
  for (const auto& e : s.elements)
    TT_REQUIRE(static_cast<int>(e.word.size()) == e.tau && e.multiplicity == 1.0, PreconditionError,
               "symbolic inducing needs explicit words of length tau");
  auto base = std::make_shared<const Potential>(phi);
  auto words = std::make_shared<std::vector<std::vector<int>>>();
  for (const auto& e : s.elements) words->push_back(e.word);
  return Potential::general(
      s.size(),
      [base, words, tail_elements](const Sequence& a) {
        std::vector<int> flat;
        for (int k = 0; k <= tail_elements; ++k) {
          const auto& w = (*words)[static_cast<std::size_t>(a.at(k))];
          flat.insert(flat.end(), w.begin(), w.end());
        }
        const int tau = static_cast<int>((*words)[static_cast<std::size_t>(a.at(0))].size());
        const Sequence x = Sequence::windowed(Word{flat, 0});
        double sum = 0.0;
        for (int k = 0; k < tau; ++k) sum += (*base)(x.shifted(k));
        return sum;
      },
      VariationBound::table({phi.variation(1) * s.max_tau()}, 0.5), true,
      json{{"kind", "induced_symbolic"}, {"base", phi.descriptor()}});
}

// phi+ = phi-bar - c * tau(a_0).
inline Potential normalize_potential(const Potential& phi_bar, const InducingScheme& s, double c) {
  TT_REQUIRE(phi_bar.alphabet_size() == s.size(), InvalidInput, "potential alphabet must match scheme size");
  if (c == 0.0) return phi_bar;
  auto tau = std::make_shared<const std::vector<int>>(s.taus());
  json desc{{"kind", "normalized"}, {"base", phi_bar.descriptor()}, {"P_L", c}};
  if (const auto* b = phi_bar.block(); b && b->first == 0) {
    BlockForm form = *b;
    auto fn = b->fn;
    form.fn = [fn, tau, c](std::span<const int> w) { return fn(w) - c * (*tau)[static_cast<std::size_t>(w[0])]; };
    return Potential::block(s.size(), std::move(form), phi_bar.bound(), desc);
  }
  auto base = std::make_shared<const Potential>(phi_bar);
  return Potential::general(
      s.size(), [base, tau, c](const Sequence& a) { return (*base)(a) - c * (*tau)[static_cast<std::size_t>(a.at(0))]; },
      phi_bar.bound(), phi_bar.one_sided(), desc);
}

// P_G(phi-bar - c tau) on the full shift over elements, with multiplicities.
inline double induced_pressure(const Potential& phi_bar, const InducingScheme& s, double c) {
  PressureOptions o;
  o.multiplicity = s.multiplicities();
  return pressure_spectral(normalize_potential(phi_bar, s, c), s.size(), 2, o).estimate;
}

struct SolvePLReport {
  double root = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double lo = 0.0, hi = 0.0;
  bool monotone = true;  // grid check of strict decrease on the bracket
  json to_json() const {
    return json{{"P_L", num(root)}, {"residual", num(residual)}, {"iterations", iterations},
                {"bracket", {num(lo), num(hi)}}, {"monotone", monotone}};
  }
};

// Root of c -> P_G(phi-bar - c tau) by bisection to tol.
inline SolvePLReport solve_PL(const Potential& phi_bar, const InducingScheme& s, double lo = -20.0, double hi = 20.0,
                              double tol = 1e-8, int grid = 9) {
  TT_REQUIRE(lo < hi, InvalidInput, "search interval must satisfy lo < hi");
  auto f = [&](double c) { return induced_pressure(phi_bar, s, c); };
  SolvePLReport r;
  r.lo = lo;
  r.hi = hi;
  double prev = f(lo);
  for (int i = 1; i <= grid; ++i) {
    const double c = lo + (hi - lo) * i / grid;
    const double v = f(c);
    if (!(v < prev)) r.monotone = false;
    prev = v;
  }
  double flo = f(lo), fhi = f(hi);
  TT_REQUIRE(std::isfinite(flo) && std::isfinite(fhi), PreconditionError, "pressure not finite on the search interval");
  if (!(flo > 0.0 && fhi < 0.0)) throw PreconditionError("root not bracketed: P_G(phi-bar - c tau) keeps its sign");
  double a = lo, b = hi;
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    ++r.iterations;
    if (fm > 0.0)
      a = m;
    else
      b = m;
  }
  r.root = 0.5 * (a + b);
  r.residual = f(r.root);
  return r;
}

// ---------------------------------------------------------------------------
// Measures on the base and their lifts

struct TowerMeasure {
  std::vector<double> weights;  // nu(J), all copies of an element together
  std::vector<int> tau;
  double Q = 0.0;

  TowerMeasure(std::vector<double> w, std::vector<int> t) : weights(std::move(w)), tau(std::move(t)) {
    TT_REQUIRE(weights.size() == tau.size() && !weights.empty(), InvalidInput, "weights and tau sizes differ");
    double tot = 0.0;
    for (double x : weights) {
      TT_REQUIRE(x >= 0.0 && std::isfinite(x), InvalidInput, "weights must be finite and >= 0");
      tot += x;
    }
    TT_REQUIRE(tot > 0.0, InvalidInput, "weights vanish");
    for (auto& x : weights) x /= tot;
    for (std::size_t i = 0; i < weights.size(); ++i) Q += weights[i] * tau[i];
  }

  json to_json() const { return json{{"weights", num_array(weights)}, {"tau", tau}, {"Q", num(Q)}}; }
};

// Bernoulli Gibbs base of a one-block normalized potential: nu(J) = m_J exp(phi+(J)).
inline TowerMeasure gibbs_base(const Potential& phi_plus, const InducingScheme& s) {
  const auto* b = phi_plus.block();
  std::vector<double> w;
  if (b && b->first == 0 && b->length == 1) {
    std::vector<double> lw;
    for (int j = 0; j < s.size(); ++j) {
      const int sym[1] = {j};
      lw.push_back(b->fn(sym) + std::log(s.elements[static_cast<std::size_t>(j)].multiplicity));
    }
    const double z = log_sum_exp(lw);
    for (double x : lw) w.push_back(std::exp(x - z));
  } else {
    PressureOptions o;
    o.multiplicity = s.multiplicities();
    w = gibbs_measure(phi_plus, s.size(), 2, o).measure.pi();
  }
  return TowerMeasure(std::move(w), s.taus());
}

struct LiftedMeasure {
  std::vector<std::vector<double>> cells;  // cells[J][k], k < tau(J)
  double Q = 0.0;
  double base_mass = 0.0;
  double total = 0.0;
  bool q_flag = false;  // Q large relative to the horizon: truncation may hide divergence

  double at(int J, int k) const { return cells[static_cast<std::size_t>(J)][static_cast<std::size_t>(k)]; }
};

inline LiftedMeasure lift_measure(const TowerMeasure& nu) {
  TT_REQUIRE(std::isfinite(nu.Q) && nu.Q > 0.0, PreconditionError, "Q must be finite to lift");
  LiftedMeasure L;
  L.Q = nu.Q;
  int tmax = 0;
  for (std::size_t J = 0; J < nu.weights.size(); ++J) {
    L.cells.emplace_back(static_cast<std::size_t>(nu.tau[J]), nu.weights[J] / nu.Q);
    L.base_mass += nu.weights[J] / nu.Q;
    tmax = std::max(tmax, nu.tau[J]);
  }
  for (const auto& col : L.cells)
    for (double x : col) L.total += x;
  // mass carried by the top shell signals a Q that still grows with the truncation
  double top = 0.0;
  for (std::size_t J = 0; J < nu.weights.size(); ++J)
    if (nu.tau[J] == tmax) top += nu.weights[J] * nu.tau[J];
  L.q_flag = tmax > 1 && top > 1e-3 * nu.Q;
  return L;
}

// Push-forward of the lift under the tower map (climb one level; from the top
// re-enter the base with weights nu). Returns max cellwise deviation.
inline double lift_invariance_defect(const LiftedMeasure& L, const TowerMeasure& nu) {
  double top = 0.0;
  for (const auto& col : L.cells) top += col.back();
  double worst = 0.0;
  for (std::size_t J = 0; J < L.cells.size(); ++J) {
    const auto& col = L.cells[J];
    worst = std::max(worst, std::abs(top * nu.weights[J] - col[0]));
    for (std::size_t k = 1; k < col.size(); ++k) worst = std::max(worst, std::abs(col[k - 1] - col[k]));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Finite tower models: a Markov chain P over base elements, heights tau and a
// potential phi(J, k) on each tower cell.

struct FiniteTowerModel {
  std::vector<std::vector<double>> P;
  std::vector<int> tau;
  std::vector<std::vector<double>> phi;  // phi[J][k]

  int states() const {
    int s = 0;
    for (int t : tau) s += t;
    return s;
  }
  // Index of cell (J, k) in the flattened tower.
  std::vector<int> offsets() const {
    std::vector<int> o;
    int s = 0;
    for (int t : tau) {
      o.push_back(s);
      s += t;
    }
    return o;
  }
  // Transition matrix of the tower map on cells.
  Eigen::MatrixXd tower_matrix() const {
    const int n = states();
    const auto off = offsets();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t J = 0; J < tau.size(); ++J) {
      for (int k = 0; k + 1 < tau[J]; ++k) M(off[J] + k, off[J] + k + 1) = 1.0;
      for (std::size_t J2 = 0; J2 < tau.size(); ++J2) M(off[J] + tau[J] - 1, off[J2]) = P[J][J2];
    }
    return M;
  }
};

inline std::vector<double> stationary_vector(const Eigen::MatrixXd& M) {
  const auto n = M.rows();
  Eigen::MatrixXd A = M.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd x = A.fullPivLu().solve(b);
  return std::vector<double>(x.data(), x.data() + n);
}

struct AbramovKacReport {
  double h_F = 0.0, h_f = 0.0, Q = 0.0;
  double int_phibar = 0.0, int_phi = 0.0;
  double entropy_residual = 0.0;   // |h_nu(F) - Q h_L(f)|
  double integral_residual = 0.0;  // |int phi-bar dnu - Q int phi dL|
  double invariance_defect = 0.0;  // |L P_tower - L|_inf
  bool pass = false;
  json to_json() const {
    return json{{"h_F", num(h_F)}, {"h_f", num(h_f)}, {"Q", num(Q)}, {"int_phibar", num(int_phibar)},
                {"int_phi", num(int_phi)}, {"entropy_residual", num(entropy_residual)},
                {"integral_residual", num(integral_residual)}, {"invariance_defect", num(invariance_defect)},
                {"pass", pass}};
  }
};

namespace detail {
inline double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }
}  // namespace detail

// Base side from the stationary chain; tower side from the lifted measure and
// the tower-map transition matrix.
inline AbramovKacReport abramov_kac_check(const FiniteTowerModel& m, double tol = 1e-8) {
  const auto K = m.tau.size();
  TT_REQUIRE(m.P.size() == K && m.phi.size() == K, InvalidInput, "tower model sizes differ");
  Eigen::MatrixXd Pb(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  for (std::size_t a = 0; a < K; ++a) {
    TT_REQUIRE(m.P[a].size() == K && static_cast<int>(m.phi[a].size()) == m.tau[a], InvalidInput, "tower model sizes differ");
    for (std::size_t b = 0; b < K; ++b) Pb(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m.P[a][b];
  }
  const auto pi = stationary_vector(Pb);
  AbramovKacReport r;
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = 0; b < K; ++b) r.h_F -= pi[a] * detail::xlogx(m.P[a][b]);
    for (double v : m.phi[a]) r.int_phibar += pi[a] * v;
  }
  const TowerMeasure nu(pi, m.tau);
  r.Q = nu.Q;
  const auto L = lift_measure(nu);
  const auto M = m.tower_matrix();
  const auto off = m.offsets();
  Eigen::VectorXd mu(M.rows());
  for (std::size_t J = 0; J < K; ++J)
    for (int k = 0; k < m.tau[J]; ++k) mu(off[J] + k) = L.at(static_cast<int>(J), k);
  for (Eigen::Index x = 0; x < M.rows(); ++x)
    for (Eigen::Index y = 0; y < M.cols(); ++y) r.h_f -= mu(x) * detail::xlogx(M(x, y));
  for (std::size_t J = 0; J < K; ++J)
    for (int k = 0; k < m.tau[J]; ++k) r.int_phi += L.at(static_cast<int>(J), k) * m.phi[J][static_cast<std::size_t>(k)];
  r.entropy_residual = std::abs(r.h_F - r.Q * r.h_f);
  r.integral_residual = std::abs(r.int_phibar - r.Q * r.int_phi);
  r.invariance_defect = (M.transpose() * mu - mu).cwiseAbs().maxCoeff();
  r.pass = r.entropy_residual <= tol && r.integral_residual <= tol && r.invariance_defect <= tol;
  return r;
}

struct KacReport {
  double Q = 0.0;           // expected first-return time to W under mu|W
  double inverse_mu_W = 0;  // 1 / mu(W)
  double residual = 0.0;
  std::vector<double> return_distribution;  // nu(tau = n), n = 1..n_max
  json to_json() const {
    return json{{"Q", num(Q)}, {"inverse_mu_W", num(inverse_mu_W)}, {"residual", num(residual)},
                {"return_distribution", num_array(return_distribution)}};
  }
};

// First returns of a finite ergodic chain to the state set W.
inline KacReport kac_check(const std::vector<std::vector<double>>& P, const std::vector<int>& W, int n_max = 0) {
  const auto n = static_cast<Eigen::Index>(P.size());
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) M(a, b) = P[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  const auto mu = stationary_vector(M);
  std::vector<bool> inW(static_cast<std::size_t>(n), false);
  for (int w : W) {
    TT_REQUIRE(w >= 0 && w < n, InvalidInput, "state outside chain");
    inW[static_cast<std::size_t>(w)] = true;
  }
  std::vector<Eigen::Index> ws, cs;
  for (Eigen::Index i = 0; i < n; ++i) (inW[static_cast<std::size_t>(i)] ? ws : cs).push_back(i);
  TT_REQUIRE(!ws.empty(), InvalidInput, "W is empty");
  const auto nc = static_cast<Eigen::Index>(cs.size());
  Eigen::MatrixXd Pcc(nc, nc);
  for (Eigen::Index i = 0; i < nc; ++i)
    for (Eigen::Index j = 0; j < nc; ++j) Pcc(i, j) = M(cs[static_cast<std::size_t>(i)], cs[static_cast<std::size_t>(j)]);
  // expected steps from each outside state until W is hit
  Eigen::VectorXd hit = Eigen::VectorXd::Zero(nc);
  if (nc > 0) hit = (Eigen::MatrixXd::Identity(nc, nc) - Pcc).fullPivLu().solve(Eigen::VectorXd::Ones(nc));
  double muW = 0.0;
  for (auto w : ws) muW += mu[static_cast<std::size_t>(w)];
  KacReport r;
  for (auto w : ws) {
    double e = 1.0;
    for (Eigen::Index j = 0; j < nc; ++j) e += M(w, cs[static_cast<std::size_t>(j)]) * hit(j);
    r.Q += mu[static_cast<std::size_t>(w)] / muW * e;
  }
  r.inverse_mu_W = 1.0 / muW;
  r.residual = std::abs(r.Q - r.inverse_mu_W);
  // nu(tau = 1) = nu P_WW 1, nu(tau = n) = nu P_Wc Pcc^{n-2} P_cW 1
  if (n_max > 0) {
    Eigen::RowVectorXd start(nc);
    double first = 0.0;
    for (Eigen::Index j = 0; j < nc; ++j) start(j) = 0.0;
    for (auto w : ws) {
      const double nw = mu[static_cast<std::size_t>(w)] / muW;
      for (auto v : ws) first += nw * M(w, v);
      for (Eigen::Index j = 0; j < nc; ++j) start(j) += nw * M(w, cs[static_cast<std::size_t>(j)]);
    }
    Eigen::VectorXd back(nc);
    for (Eigen::Index j = 0; j < nc; ++j) {
      back(j) = 0.0;
      for (auto v : ws) back(j) += M(cs[static_cast<std::size_t>(j)], v);
    }
    r.return_distribution.push_back(first);
    Eigen::RowVectorXd cur = start;
    for (int k = 2; k <= n_max; ++k) {
      r.return_distribution.push_back(nc > 0 ? cur.dot(back) : 0.0);
      if (nc > 0) cur = cur * Pcc;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Summability diagnostics over tau-shells

struct RatioVerdict {
  std::vector<double> shell;    // per-tau contributions, index n - 1
  std::vector<double> partial;  // partial sums
  double ratio = 0.0;           // fitted per-shell ratio over the upper half
  std::string verdict;          // "pass" | "fail" | "inconclusive at truncation N"
  json to_json() const {
    return json{{"shell", num_array(shell)}, {"partial", num_array(partial)}, {"ratio", num(ratio)}, {"verdict", verdict}};
  }
};

// Geometric ratio test on nonnegative shell terms (logs supplied).
inline RatioVerdict ratio_test(const std::vector<double>& log_terms, int truncation, double margin = 0.02) {
  RatioVerdict r;
  LogSum acc;
  for (double lt : log_terms) {
    r.shell.push_back(std::exp(lt));
    acc.add(lt);
    r.partial.push_back(std::exp(acc.value()));
  }
  std::vector<double> xs, ys;
  const auto n = log_terms.size();
  for (std::size_t i = n / 2; i < n; ++i)
    if (std::isfinite(log_terms[i])) {
      xs.push_back(static_cast<double>(i + 1));
      ys.push_back(log_terms[i]);
    }
  const std::string inc = "inconclusive at truncation " + std::to_string(truncation);
  if (xs.size() < 3) {
    bool nonzero_tail = false;
    for (std::size_t i = n / 2; i < n; ++i) nonzero_tail = nonzero_tail || std::isfinite(log_terms[i]);
    r.ratio = 0.0;
    r.verdict = nonzero_tail ? inc : "pass";
    return r;
  }
  r.ratio = std::exp(ls_slope(xs, ys));
  if (r.ratio < 1.0 - margin)
    r.verdict = "pass";
  else if (r.ratio > 1.0 + margin)
    r.verdict = "fail";
  else
    r.verdict = inc;
  return r;
}

struct PConditionsReport {
  json P2, P3, P4;
  double largest_eps = kNegInf;
  json to_json() const { return json{{"P2", P2}, {"P3", P3}, {"P4", P4}, {"largest_passing_eps", num(largest_eps)}}; }
};

// Fit log V_n = log C + n log r.
inline json fit_variation(const std::vector<double>& V) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < V.size(); ++i)
    if (V[i] > 0.0) {
      xs.push_back(static_cast<double>(i + 1));
      ys.push_back(std::log(V[i]));
    }
  if (xs.empty()) return json{{"C", 0.0}, {"r", 0.0}, {"residual", 0.0}, {"verdict", "pass"}, {"note", "zero variation"}};
  if (xs.size() < 2) return json{{"C", V[0]}, {"r", 0.0}, {"residual", 0.0}, {"verdict", "pass"}};
  const double slope = ls_slope(xs, ys);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= xs.size();
  const double icpt = my - slope * mx;
  double res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) res = std::max(res, std::abs(ys[i] - icpt - slope * xs[i]));
  const double r = std::exp(slope);
  return json{{"C", num(std::exp(icpt))}, {"r", num(r)}, {"residual", num(res)}, {"verdict", r < 1.0 ? "pass" : "fail"}};
}

// Shell sums of m sup exp(phi-bar) (P3) and of m tau sup exp(phi+ + eps tau) (P4)
// with phi+ = phi-bar - P_L tau. `variation` is the sampled V_n ladder of phi-bar.
inline PConditionsReport check_P_conditions(const InducingScheme& s, const InducedValues& v, double P_L,
                                            const std::vector<double>& eps_grid,
                                            const std::vector<double>& variation = {}) {
  TT_REQUIRE(static_cast<int>(v.sup.size()) == s.size(), InvalidInput, "one sup per element required");
  const int T = s.max_tau();
  auto shells = [&](const std::function<double(const SchemeElement&, double)>& logterm) {
    std::vector<LogSum> acc(static_cast<std::size_t>(T));
    for (std::size_t j = 0; j < s.elements.size(); ++j) {
      const auto& e = s.elements[j];
      acc[static_cast<std::size_t>(e.tau - 1)].add(std::log(e.multiplicity) + logterm(e, v.sup[j]));
    }
    std::vector<double> out;
    for (const auto& a : acc) out.push_back(a.value());
    return out;
  };
  PConditionsReport r;
  r.P2 = fit_variation(variation.empty() ? std::vector<double>{v.variation} : variation);
  r.P3 = ratio_test(shells([](const SchemeElement&, double sup) { return sup; }), T).to_json();
  json p4 = json::array();
  for (double eps : eps_grid) {
    auto rv = ratio_test(shells([&](const SchemeElement& e, double sup) {
                           return std::log(static_cast<double>(e.tau)) + sup - P_L * e.tau + eps * e.tau;
                         }),
                         T);
    p4.push_back({{"eps", eps}, {"ratio", num(rv.ratio)}, {"partial_sum", num(rv.partial.back())}, {"verdict", rv.verdict}});
    if (rv.verdict == "pass") r.largest_eps = std::max(r.largest_eps, eps);
  }
  r.P4 = p4;
  return r;
}

struct TailReport {
  double C = 0.0, theta = 0.0, r2 = 0.0;
  double r2_power = 0.0;  // fit of log tail against log n, for comparison
  std::string verdict;
  std::vector<double> tail;  // nu(tau >= n), n = 1..
  json to_json() const {
    return json{{"C", num(C)}, {"theta", num(theta)}, {"r2", num(r2)}, {"r2_power", num(r2_power)},
                {"verdict", verdict}, {"tail", num_array(tail)}};
  }
};

namespace detail {
inline double r_squared(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& icpt) {
  slope = ls_slope(x, y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= x.size();
  icpt = my - slope * mx;
  double ss = 0, st = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss += std::pow(y[i] - icpt - slope * x[i], 2);
    st += std::pow(y[i] - my, 2);
  }
  return st > 0 ? 1.0 - ss / st : 1.0;
}
}  // namespace detail

// Fits log nu(tau = n) ~ log C + n log theta over the upper half of the shells
// (the shell masses are not distorted by the truncation, unlike the tail).
// The verdict requires theta < 1 and a geometric fit at least as good as a
// power-law fit against log n.
inline TailReport check_exponential_tail(const TowerMeasure& nu) {
  int T = 0;
  for (int t : nu.tau) T = std::max(T, t);
  std::vector<double> mass(static_cast<std::size_t>(T + 2), 0.0);
  for (std::size_t i = 0; i < nu.tau.size(); ++i) mass[static_cast<std::size_t>(nu.tau[i])] += nu.weights[i];
  TailReport r;
  double acc = 0.0;
  std::vector<double> tail(static_cast<std::size_t>(T + 1), 0.0);
  for (int n = T; n >= 1; --n) tail[static_cast<std::size_t>(n)] = (acc += mass[static_cast<std::size_t>(n)]);
  for (int n = 1; n <= T; ++n) r.tail.push_back(tail[static_cast<std::size_t>(n)]);
  std::vector<double> xs, ys, lx;
  for (int n = std::max(2, T / 2); n <= T; ++n)
    if (mass[static_cast<std::size_t>(n)] > 1e-300) {
      xs.push_back(n);
      lx.push_back(std::log(static_cast<double>(n)));
      ys.push_back(std::log(mass[static_cast<std::size_t>(n)]));
    }
  if (xs.size() < 4) {
    r.verdict = "inconclusive";
    return r;
  }
  double slope, icpt, ps, pi_;
  r.r2 = detail::r_squared(xs, ys, slope, icpt);
  r.r2_power = detail::r_squared(lx, ys, ps, pi_);
  r.theta = std::exp(slope);
  r.C = std::exp(icpt);
  r.verdict = (r.theta < 1.0 && r.r2 >= r.r2_power) ? "pass" : "fail";
  return r;
}

// t0 = (h + int phi1) / (log lambda1 + int phi1); -inf when the denominator vanishes.
inline double estimate_t0(double h_fit, double int_phi1, double log_lambda1, double tol = 1e-12) {
  TT_REQUIRE(h_fit < -int_phi1, PreconditionError, "need h < -int phi_1 dmu_1 (entropy gap)");
  TT_REQUIRE(-int_phi1 <= log_lambda1 + tol, PreconditionError, "need -int phi_1 dmu_1 <= log lambda_1");
  const double den = log_lambda1 + int_phi1;
  if (std::abs(den) <= tol) return kNegInf;
  return (h_fit + int_phi1) / den;
}

}  // namespace tower_thermo
