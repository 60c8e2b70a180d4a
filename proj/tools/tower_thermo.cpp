// tower-thermo: command-line frontend.
//
// Every subcommand reads an optional JSON config (--config), lets flags named
// after its config keys override entries, and produces named artifacts. With
// --out DIR the artifacts are written there together with a sidecar
// <command>.meta.json holding the timestamp; without it they go to stdout.
//
// Exit codes: 0 success, 1 validation failure, 2 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "tower_thermo/catmap.hpp"
#include "tower_thermo/cohomology.hpp"
#include "tower_thermo/gibbs.hpp"
#include "tower_thermo/katok.hpp"
#include "tower_thermo/liftability.hpp"
#include "tower_thermo/potential_io.hpp"
#include "tower_thermo/pressure.hpp"
#include "tower_thermo/stats.hpp"
#include "tower_thermo/symbolic.hpp"
#include "tower_thermo/tower.hpp"

namespace fs = std::filesystem;
using namespace tower_thermo;

namespace {

struct Common {
  std::string config, out;
  std::uint64_t seed = 1;
  int truncation = 0;
  double tol = 0.0;
};

struct Artifact {
  std::string name, body;
};

// Config merged with flag overrides; `base` resolves relative paths.
struct Settings {
  json j = json::object();
  fs::path base = ".";

  bool has(const std::string& k) const { return j.contains(k); }
  template <class T>
  T get(const std::string& k, T fallback) const {
    if (!j.contains(k)) return fallback;
    try {
      return j.at(k).get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput("config key '" + k + "': " + e.what());
    }
  }
  void restrict(const std::set<std::string>& keys, const std::string& what) const {
    detail::reject_unknown_keys(j, keys, what);
  }
  // A path string (relative to the config) or an inline object.
  json document(const std::string& k) const {
    TT_REQUIRE(j.contains(k), InvalidInput, "missing '" + k + "'");
    const auto& v = j.at(k);
    if (v.is_object()) return v;
    TT_REQUIRE(v.is_string(), InvalidInput, "'" + k + "' must be a path or an object");
    fs::path p = v.get<std::string>();
    if (p.is_relative()) p = base / p;
    return read_json_file(p.string());
  }
};

Settings load_settings(const Common& c) {
  Settings s;
  if (!c.config.empty()) {
    s.j = read_json_file(c.config);
    TT_REQUIRE(s.j.is_object(), InvalidInput, "config must be a JSON object");
    s.base = fs::path(c.config).parent_path();
    if (s.base.empty()) s.base = ".";
  }
  return s;
}

// Flag overrides are applied with paths relative to the working directory.
void set_path(Settings& s, const std::string& key, const std::string& value) {
  if (value.empty()) return;
  fs::path p = value;
  if (p.is_relative() && s.base != ".") p = fs::absolute(p);
  s.j[key] = p.string();
}

template <class T>
void set_if(Settings& s, const std::string& key, const std::optional<T>& v) {
  if (v) s.j[key] = *v;
}

std::string utc_timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void emit(const std::string& command, const Common& c, const std::vector<Artifact>& arts,
          const std::vector<std::string>& argv) {
  if (c.out.empty()) {
    for (const auto& a : arts) std::cout << a.body;
    return;
  }
  fs::create_directories(c.out);
  json names = json::array();
  for (const auto& a : arts) {
    std::ofstream f(fs::path(c.out) / a.name, std::ios::binary);
    TT_REQUIRE(f.good(), InvalidInput, "cannot write " + (fs::path(c.out) / a.name).string());
    f << a.body;
    names.push_back(a.name);
  }
  json meta{{"command", command}, {"argv", argv}, {"seed", c.seed}, {"artifacts", names},
            {"timestamp", utc_timestamp()}, {"threads", thread_count()}};
  std::string stem = command;
  std::replace(stem.begin(), stem.end(), ' ', '-');
  std::ofstream f(fs::path(c.out) / (stem + ".meta.json"), std::ios::binary);
  f << meta.dump(2) << '\n';
}

Artifact json_artifact(const std::string& name, const json& j) { return {name, dump17(j) + '\n'}; }

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  auto number = [](const std::string& x) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(x, &pos);
      TT_REQUIRE(pos == x.size(), InvalidInput, "bad number '" + x + "'");
      return v;
    } catch (const std::logic_error&) {
      throw InvalidInput("bad number '" + x + "'");
    }
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    TT_REQUIRE(parts.size() == 3, InvalidInput, "grid must read a:b:step");
    const double a = number(parts[0]), b = number(parts[1]), h = number(parts[2]);
    TT_REQUIRE(h > 0.0 && b >= a, InvalidInput, "grid needs step > 0 and a <= b");
    const long n = static_cast<long>(std::floor((b - a) / h + 1e-9));
    TT_REQUIRE(n < 100000, InvalidInput, "grid too long");
    for (long k = 0; k <= n; ++k) out.push_back(a + k * h);
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  TT_REQUIRE(!out.empty(), InvalidInput, "empty grid");
  return out;
}

// ---------------------------------------------------------------------------
// Schemes: a descriptor, or a generator for the built-in first-return schemes

InducingScheme scheme_from(const json& d) {
  if (!d.contains("generator")) return InducingScheme::from_json(d);
  const std::string g = d.at("generator").get<std::string>();
  if (g == "full_shift_first_return") {
    detail::reject_unknown_keys(d, {"generator", "alphabet", "base", "horizon", "explicit_horizon"}, "generator");
    const int h = d.value("horizon", 14);
    return first_return_scheme(SFT::full(d.value("alphabet", 3)), d.value("base", 0), h,
                               d.value("explicit_horizon", std::min(h, 10)));
  }
  if (g == "cat_first_return") {
    detail::reject_unknown_keys(d, {"generator", "partition", "base", "horizon", "explicit_horizon"}, "generator");
    const auto part = MarkovPartition::from_json(d.value("partition", json("standard")));
    return cat_first_return_scheme(part, d.value("base", kCatBaseSymbol), d.value("horizon", 64),
                                   d.value("explicit_horizon", 12));
  }
  throw InvalidInput("unknown scheme generator '" + g + "'");
}

struct FamilyChoice {
  InducedValues values;
  std::string family;
  double parameter;
};

FamilyChoice induced_family(const Settings& s, const InducingScheme& sc) {
  const std::string fam = s.get<std::string>("family", "geometric");
  if (fam == "geometric") {
    const double t = s.get<double>("t", 1.0);
    return {induce_geometric(sc, t), fam, t};
  }
  if (fam == "constant") {
    const double c = s.get<double>("c", 0.0);
    return {induce_constant(sc, c), fam, c};
  }
  throw InvalidInput("family must be geometric or constant");
}

// ---------------------------------------------------------------------------
// Subcommands

std::vector<Artifact> run_pressure(Settings& s, const Common& c) {
  s.restrict({"potential", "alphabet", "method", "n_max", "base", "depth"}, "pressure config");
  const auto phi = potential_from_json(s.document("potential"));
  const int N = c.truncation > 0 ? c.truncation : s.get<int>("alphabet", phi.alphabet_size());
  const std::string method = s.get<std::string>("method", "both");
  TT_REQUIRE(method == "both" || method == "periodic" || method == "spectral", InvalidInput,
             "method must be periodic, spectral or both");
  PressureOptions o;
  if (c.tol > 0) o.tol = c.tol;
  json r{{"alphabet", N}, {"method", method}, {"periodic", nullptr}, {"spectral", nullptr}};
  double a = std::numeric_limits<double>::quiet_NaN(), b = a;
  if (method != "spectral") {
    auto p = pressure_periodic(phi, s.get<int>("base", 0), s.get<int>("n_max", 12), N, o);
    a = p.estimate;
    r["periodic"] = p.to_json();
  }
  if (method != "periodic") {
    auto p = pressure_spectral(phi, N, s.get<int>("depth", 2), o);
    b = p.estimate;
    r["spectral"] = p.to_json();
  }
  r["difference"] = method == "both" ? num(std::abs(a - b)) : json(nullptr);
  return {json_artifact("pressure.json", r)};
}

std::vector<Artifact> run_reduce(Settings& s, const Common& c) {
  s.restrict({"potential", "J", "fill", "period_max", "n_max"}, "reduce config");
  const auto phi = potential_from_json(s.document("potential"));
  ReferenceFill fill;
  if (s.has("fill")) fill.symbols = s.get<std::vector<int>>("fill", {});
  const int J = c.truncation > 0 ? c.truncation : s.get<int>("J", default_truncation(phi));
  const auto psi = reduce_to_one_sided(phi, fill, J);
  const double tail = bowen_tail(phi, J);
  const int P = s.get<int>("period_max", 10);
  TT_REQUIRE(P >= 1 && std::pow(double(phi.alphabet_size()), P) <= 2e7, ResourceError, "too many periodic words");
  double worst = 0.0;
  long words = 0;
  for (int n = 1; n <= P; ++n) {
    std::vector<int> w(static_cast<std::size_t>(n), 0);
    while (true) {
      worst = std::max(worst, periodic_cohomology_check(phi, psi, PeriodicSequence(w)));
      ++words;
      int i = n - 1;
      while (i >= 0 && ++w[static_cast<std::size_t>(i)] == phi.alphabet_size()) w[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
    }
  }
  PressureOptions o;
  if (c.tol > 0) o.tol = c.tol;
  json r{{"J", J},
         {"tail_bound", num(tail)},
         {"period_max", P},
         {"periodic_words", words},
         {"max_periodic_deviation", num(worst)},
         {"within_bound", worst <= 2.0 * tail + 1e-12},
         {"pressure_reduced", pressure_periodic(psi, 0, s.get<int>("n_max", 12), 0, o).to_json()},
         {"descriptor", psi.descriptor()}};
  return {json_artifact("reduce.json", r)};
}

std::vector<Artifact> run_gibbs(Settings& s, const Common& c) {
  s.restrict({"potential", "alphabet", "L", "pressure_offset", "depth"}, "gibbs-check config");
  const auto phi = potential_from_json(s.document("potential"));
  const int N = c.truncation > 0 ? c.truncation : s.get<int>("alphabet", phi.alphabet_size());
  PressureOptions o;
  if (c.tol > 0) o.tol = c.tol;
  const auto g = gibbs_measure(phi, N, s.get<int>("depth", 2), o);
  const double off = s.get<double>("pressure_offset", 0.0);
  const auto rep = verify_gibbs(g.measure, phi, g.pressure + off, s.get<int>("L", 6));
  json r{{"alphabet", N}, {"pressure", num(g.pressure)}, {"pressure_offset", num(off)}, {"report", rep.to_json()},
         {"stationary", num_array(g.measure.pi())}};
  return {json_artifact("gibbs.json", r)};
}

std::vector<Artifact> run_tower(Settings& s, const Common& c) {
  s.restrict({"scheme", "family", "t", "c", "lo", "hi", "eps_grid"}, "tower-check config");
  const auto sc = scheme_from(s.document("scheme"));
  const auto fam = induced_family(s, sc);
  const auto bar = induced_one_block(sc, fam.values.value);
  const auto PL = solve_PL(bar, sc, s.get<double>("lo", -20.0), s.get<double>("hi", 20.0), c.tol > 0 ? c.tol : 1e-10);
  const auto nu = gibbs_base(normalize_potential(bar, sc, PL.root), sc);
  const auto pc =
      check_P_conditions(sc, fam.values, PL.root, s.get<std::vector<double>>("eps_grid", {0.0, 0.05, 0.1, 0.2}));
  json r{{"family", fam.family},       {"parameter", num(fam.parameter)},
         {"elements", sc.size()},      {"max_tau", sc.max_tau()},
         {"solve", PL.to_json()},      {"P_conditions", pc.to_json()},
         {"tail", check_exponential_tail(nu).to_json()}, {"Q", num(nu.Q)}};
  return {json_artifact("tower.json", r)};
}

std::vector<Artifact> run_lift(Settings& s, const Common& c) {
  s.restrict({"scheme", "family", "t", "c", "lo", "hi"}, "lift config");
  const auto sc = scheme_from(s.document("scheme"));
  const auto fam = induced_family(s, sc);
  const auto bar = induced_one_block(sc, fam.values.value);
  const auto PL = solve_PL(bar, sc, s.get<double>("lo", -20.0), s.get<double>("hi", 20.0), c.tol > 0 ? c.tol : 1e-10);
  const auto nu = gibbs_base(normalize_potential(bar, sc, PL.root), sc);
  const auto L = lift_measure(nu);
  std::string csv = "element,level,mass\n";
  for (std::size_t J = 0; J < L.cells.size(); ++J)
    for (std::size_t k = 0; k < L.cells[J].size(); ++k)
      csv += std::to_string(J) + ',' + std::to_string(k) + ',' + fmt17(L.cells[J][k]) + '\n';
  json r{{"P_L", num(PL.root)},
         {"Q", num(L.Q)},
         {"base_mass", num(L.base_mass)},
         {"total", num(L.total)},
         {"q_flag", L.q_flag},
         {"invariance_defect", num(lift_invariance_defect(L, nu))},
         {"base", nu.to_json()}};
  return {{"lift.csv", csv}, json_artifact("lift.json", r)};
}

std::vector<Artifact> run_abramov(Settings& s, const Common& c) {
  s.restrict({"P", "tau", "phi", "W"}, "abramov config");
  FiniteTowerModel m;
  m.P = s.get<std::vector<std::vector<double>>>("P", {});
  m.tau = s.get<std::vector<int>>("tau", {});
  m.phi = s.get<std::vector<std::vector<double>>>("phi", {});
  TT_REQUIRE(!m.P.empty(), InvalidInput, "abramov needs P, tau and phi");
  for (const auto& row : m.P) {
    double t = 0.0;
    for (double x : row) {
      TT_REQUIRE(x >= 0.0, InvalidInput, "P must be nonnegative");
      t += x;
    }
    TT_REQUIRE(std::abs(t - 1.0) < 1e-9, InvalidInput, "rows of P must sum to 1");
  }
  json r{{"abramov_kac", abramov_kac_check(m, c.tol > 0 ? c.tol : 1e-8).to_json()}};
  if (s.has("W")) r["kac"] = kac_check(m.P, s.get<std::vector<int>>("W", {}), 12).to_json();
  return {json_artifact("abramov.json", r)};
}

std::vector<Artifact> run_liftability(Settings& s, const Common&) {
  s.restrict({"scheme", "h", "burn_in"}, "liftability config");
  const auto sc = scheme_from(s.document("scheme"));
  const auto p = count_profile(sc);
  json r = p.to_json();
  if (s.has("h")) r["L2"] = check_L2(p, s.get<double>("h", 1.0), s.get<int>("burn_in", 0)).to_json();
  return {{"count_profile.csv", p.to_csv()}, json_artifact("liftability.json", r)};
}

// Katok commands share one config block.
struct KatokFlags {
  std::optional<double> r0, r1, alpha, ode_tol, guard_radius;
  std::optional<std::string> psi_variant;
  std::optional<int> nx, ny, horizon;
  std::string t_grid = "-0.25:1:0.25";
  long steps = 1000000;
  int lyap_grid = 200;
};

KatokConfig katok_config(Settings& s, const Common& c, const KatokFlags& f) {
  set_if(s, "r0", f.r0);
  set_if(s, "r1", f.r1);
  set_if(s, "alpha", f.alpha);
  set_if(s, "psi_variant", f.psi_variant);
  set_if(s, "ode_tol", c.tol > 0 ? std::optional<double>(c.tol) : f.ode_tol);
  set_if(s, "guard_radius", f.guard_radius);
  set_if(s, "horizon", f.horizon);
  if (f.nx || f.ny) {
    json g = s.j.value("grid", json::object());
    if (f.nx) g["nx"] = *f.nx;
    if (f.ny) g["ny"] = *f.ny;
    s.j["grid"] = g;
  }
  return KatokConfig::from_json(s.j);
}

KatokAdapter katok_adapter(const KatokConfig& k) {
  return KatokAdapter(KatokMap(k.params), MarkovPartition::from_json(k.partition), kCatBaseSymbol);
}

GridSchemeOptions grid_options(const KatokConfig& k) {
  GridSchemeOptions o;
  o.nx = k.nx;
  o.ny = k.ny;
  o.horizon = k.horizon;
  return o;
}

std::vector<Artifact> run_katok_simulate(Settings& s, const Common& c, const KatokFlags& f) {
  const auto k = katok_config(s, c, f);
  const auto A = katok_adapter(k);
  std::vector<GridCell> cells;
  const auto sc = katok_first_return_scheme(A, grid_options(k), &cells);
  std::map<int, long> hist;
  for (const auto& x : cells) ++hist[x.tau];
  json h = json::object();
  for (const auto& [t, n] : hist) h[std::to_string(t)] = n;
  json r{{"config", k.to_json()},
         {"slowdown", check_slowdown(k.params)},
         {"base_clearance", num(A.clearance())},
         {"cells", cells.size()},
         {"returned_fraction", num(1.0 - static_cast<double>(hist[0]) / cells.size())},
         {"tau_histogram", h},
         {"found_words", sc.meta.value("found_words", 0)}};
  return {{"cells.csv", grid_cells_csv(cells)}, json_artifact("simulate.json", r)};
}

std::vector<Artifact> run_katok_induce(Settings& s, const Common& c, const KatokFlags& f) {
  const auto k = katok_config(s, c, f);
  const auto sc = katok_first_return_scheme(katok_adapter(k), grid_options(k));
  const auto p = count_profile(sc);
  json r{{"elements", sc.size()}, {"horizon", sc.horizon}, {"residual_mass", num(sc.residual_mass)},
         {"h_fit", num(p.h_fit)}, {"meta", sc.meta}};
  return {json_artifact("scheme.json", sc.to_json()), json_artifact("induce.json", r)};
}

std::vector<Artifact> run_katok_curve(Settings& s, const Common& c, const KatokFlags& f) {
  const auto k = katok_config(s, c, f);
  const auto sc = katok_first_return_scheme(katok_adapter(k), grid_options(k));
  const auto curve = pressure_curve(sc, parse_grid(f.t_grid));
  json r = curve.to_json();
  r["config"] = k.to_json();
  r["log_lambda"] = num(CatMap().log_lambda());
  return {{"pressure_curve.csv", curve.to_csv()}, json_artifact("pressure_curve.json", r)};
}

std::vector<Artifact> run_katok_lyapunov(Settings& s, const Common& c, const KatokFlags& f) {
  const auto k = katok_config(s, c, f);
  TT_REQUIRE(f.steps >= 1 && f.lyap_grid >= 1, InvalidInput, "steps and grid must be positive");
  const KatokMap G(k.params);
  const auto rep = lyapunov_report(G, f.steps, f.lyap_grid, c.seed);
  json r = rep.to_json();
  r["log_lambda"] = num(G.cat().log_lambda());
  r["config"] = k.to_json();
  r["seed"] = c.seed;
  return {json_artifact("lyapunov.json", r)};
}

struct ChainPoint {
  int x;
  std::uint64_t key;
};

std::vector<Artifact> run_correlations(Settings& s, const Common& c) {
  s.restrict({"P", "h1", "h2", "n_max", "method", "starts", "scheme", "t", "lo", "hi", "min_lags"},
             "correlations config");
  const int n_max = s.get<int>("n_max", 40);
  TT_REQUIRE(n_max >= 1, InvalidInput, "n_max must be positive");
  json r;
  CorrelationSeries series;
  if (s.has("scheme")) {
    const auto sc = scheme_from(s.document("scheme"));
    const double t = s.get<double>("t", 0.5);
    series = renewal_correlations(geometric_equilibrium_base(sc, t, s.get<double>("lo", -10.0), s.get<double>("hi", 10.0)),
                                  n_max);
    r["source"] = "tower";
    r["t"] = num(t);
  } else {
    const auto P = s.get<std::vector<std::vector<double>>>("P", {});
    TT_REQUIRE(!P.empty(), InvalidInput, "correlations needs P or scheme");
    const auto h1 = s.get<std::vector<double>>("h1", {});
    const auto h2 = s.get<std::vector<double>>("h2", h1);
    TT_REQUIRE(h1.size() == P.size() && h2.size() == P.size(), InvalidInput, "observables must have one entry per state");
    const std::string method = s.get<std::string>("method", "exact");
    if (method == "exact") {
      series = chain_correlations(P, h1, h2, n_max);
    } else if (method == "sampled") {
      const auto M = to_matrix(P);
      const Eigen::VectorXd mu = chain_stationary(M);
      auto pick = [](const std::vector<double>& row, double u) {
        double a = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i)
          if (u < (a += row[i])) return static_cast<int>(i);
        return static_cast<int>(row.size()) - 1;
      };
      const std::vector<double> muv(mu.data(), mu.data() + mu.size());
      auto draw = [&](std::mt19937_64& rng) {
        return ChainPoint{pick(muv, std::uniform_real_distribution<double>(0, 1)(rng)), rng()};
      };
      auto step = [&](ChainPoint p) {
        std::mt19937_64 g(p.key);
        const int nx = pick(P[static_cast<std::size_t>(p.x)], std::uniform_real_distribution<double>(0, 1)(g));
        return ChainPoint{nx, g()};
      };
      auto f1 = [&](ChainPoint p) { return h1[static_cast<std::size_t>(p.x)]; };
      auto f2 = [&](ChainPoint p) { return h2[static_cast<std::size_t>(p.x)]; };
      series = sampled_correlations<ChainPoint>(draw, step, f1, f2, n_max, s.get<long>("starts", 20000), c.seed);
    } else {
      throw InvalidInput("method must be exact or sampled");
    }
    const auto sb = chain_spectral_bound(P, h1, h2);
    r["source"] = "chain";
    r["spectral_bound"] = {{"lambda2", num(sb.lambda2)}, {"C", num(sb.C)}};
  }
  r["series"] = series.to_json();
  r["fit"] = fit_decay(series, s.get<int>("min_lags", 8)).to_json();
  return {{"correlations.csv", series.to_csv()}, json_artifact("correlations.json", r)};
}

std::vector<Artifact> run_clt(Settings& s, const Common& c) {
  s.restrict({"P", "h", "n", "replicas", "ks_constant"}, "clt config");
  const auto P = s.get<std::vector<std::vector<double>>>("P", {});
  const auto h = s.get<std::vector<double>>("h", {});
  TT_REQUIRE(!P.empty() && h.size() == P.size(), InvalidInput, "clt needs P and h with one entry per state");
  const long n = s.get<long>("n", 1000);
  const auto rep = clt_check(chain_centered_sum(P, h), n, s.get<int>("replicas", 1000), c.seed,
                             s.get<double>("ks_constant", 1.628));
  json r = rep.to_json();
  r["asymptotic_variance"] = num(chain_asymptotic_variance(P, h));
  return {json_artifact("clt.json", r)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermodynamic formalism toolkit"};
  app.require_subcommand(1);
  Common c;
  std::string potential, scheme, method;
  std::optional<int> alphabet, L, n_max, J, period_max;
  std::optional<double> t, pressure_offset, h;
  KatokFlags kf;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "JSON config");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--truncation", c.truncation, "alphabet or series truncation");
    sub->add_option("--tol", c.tol, "numerical tolerance");
  };
  auto katok_flags = [&](CLI::App* sub) {
    common(sub);
    sub->add_option("--r0", kf.r0);
    sub->add_option("--r1", kf.r1);
    sub->add_option("--alpha", kf.alpha);
    sub->add_option("--psi-variant", kf.psi_variant);
    sub->add_option("--ode-tol", kf.ode_tol);
    sub->add_option("--guard-radius", kf.guard_radius);
    sub->add_option("--nx", kf.nx);
    sub->add_option("--ny", kf.ny);
    sub->add_option("--horizon", kf.horizon);
  };

  auto* pressure = app.add_subcommand("pressure", "Gurevich pressure by periodic sums and transfer matrix");
  common(pressure);
  pressure->add_option("--potential", potential, "potential descriptor");
  pressure->add_option("--alphabet", alphabet, "truncated alphabet size");
  pressure->add_option("--method", method, "periodic, spectral or both");
  pressure->add_option("--n-max", n_max, "largest period");

  auto* reduce = app.add_subcommand("reduce", "cohomologous one-sided potential");
  common(reduce);
  reduce->add_option("--potential", potential);
  reduce->add_option("--J", J);
  reduce->add_option("--period-max", period_max);

  auto* gibbs = app.add_subcommand("gibbs-check", "Gibbs property of the equilibrium measure");
  common(gibbs);
  gibbs->add_option("--potential", potential);
  gibbs->add_option("--alphabet", alphabet);
  gibbs->add_option("--L", L);
  gibbs->add_option("--pressure-offset", pressure_offset);

  auto* tower = app.add_subcommand("tower-check", "P_L, summability and tail of an inducing scheme");
  common(tower);
  tower->add_option("--scheme", scheme);
  tower->add_option("--t", t);

  auto* lift = app.add_subcommand("lift", "lift of the base equilibrium measure to the tower");
  common(lift);
  lift->add_option("--scheme", scheme);
  lift->add_option("--t", t);

  auto* abramov = app.add_subcommand("abramov", "Abramov and Kac identities on a finite tower model");
  common(abramov);

  auto* liftab = app.add_subcommand("liftability", "return-count profile of a scheme");
  common(liftab);
  liftab->add_option("--scheme", scheme);
  liftab->add_option("--entropy-bound", h, "h for the S* bound");

  auto* katok = app.add_subcommand("katok", "slowed-down cat map");
  katok->require_subcommand(1);
  auto* ksim = katok->add_subcommand("simulate", "grid first returns");
  katok_flags(ksim);
  auto* kind = katok->add_subcommand("induce", "first-return scheme descriptor");
  katok_flags(kind);
  auto* kcurve = katok->add_subcommand("pressure-curve", "P_L(t) of the geometric family");
  katok_flags(kcurve);
  kcurve->add_option("--t-grid", kf.t_grid, "a:b:step or a comma list");
  auto* klyap = katok->add_subcommand("lyapunov", "Lyapunov exponent of the invariant density");
  katok_flags(klyap);
  klyap->add_option("--steps", kf.steps);
  klyap->add_option("--lyap-grid", kf.lyap_grid);

  auto* stats = app.add_subcommand("stats", "decay of correlations and CLT");
  stats->require_subcommand(1);
  auto* corr = stats->add_subcommand("correlations", "correlation series and exponential fit");
  common(corr);
  corr->add_option("--scheme", scheme);
  corr->add_option("--t", t);
  corr->add_option("--n-max", n_max);
  auto* clt = stats->add_subcommand("clt", "KS test of normalized Birkhoff sums");
  common(clt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::vector<std::string> args(argv, argv + argc);
  try {
    Settings s = load_settings(c);
    set_path(s, "potential", potential);
    set_path(s, "scheme", scheme);
    if (!method.empty()) s.j["method"] = method;
    set_if(s, "alphabet", alphabet);
    set_if(s, "L", L);
    set_if(s, "n_max", n_max);
    set_if(s, "J", J);
    set_if(s, "period_max", period_max);
    set_if(s, "t", t);
    set_if(s, "pressure_offset", pressure_offset);
    set_if(s, "h", h);

    std::string name;
    std::vector<Artifact> out;
    if (*pressure) {
      name = "pressure";
      out = run_pressure(s, c);
    } else if (*reduce) {
      name = "reduce";
      out = run_reduce(s, c);
    } else if (*gibbs) {
      name = "gibbs-check";
      out = run_gibbs(s, c);
    } else if (*tower) {
      name = "tower-check";
      out = run_tower(s, c);
    } else if (*lift) {
      name = "lift";
      out = run_lift(s, c);
    } else if (*abramov) {
      name = "abramov";
      out = run_abramov(s, c);
    } else if (*liftab) {
      name = "liftability";
      out = run_liftability(s, c);
    } else if (*ksim) {
      name = "katok simulate";
      out = run_katok_simulate(s, c, kf);
    } else if (*kind) {
      name = "katok induce";
      out = run_katok_induce(s, c, kf);
    } else if (*kcurve) {
      name = "katok pressure-curve";
      out = run_katok_curve(s, c, kf);
    } else if (*klyap) {
      name = "katok lyapunov";
      out = run_katok_lyapunov(s, c, kf);
    } else if (*corr) {
      name = "stats correlations";
      out = run_correlations(s, c);
    } else if (*clt) {
      name = "stats clt";
      out = run_clt(s, c);
    }
    emit(name, c, out, args);
    return 0;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const PreconditionError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}
