#pragma once

// JSON potential descriptors:
//   {"kind": "markov1"|"bernoulli"|"tabulated"|"geometric_katok"|"constant",
//    "params": {...}, "holder": {"C": c, "r": r}}
//
//   markov1         params.matrix (Phi = log M[a0][a1]) or params.log_matrix
//   bernoulli       params.p (Phi = log p[a0])
//   tabulated       params.first, params.length, params.values (row-major, N^length)
//   geometric_katok params.t, params.log_ju (Phi = -t * log_ju[a0])
//   constant        params.alphabet, params.c
//   reduced         base, fill, J (Bowen reduction of base)
//   shifted         base, constant

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "tower_thermo/cohomology.hpp"

namespace tower_thermo {

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  TT_REQUIRE(j.is_object(), InvalidInput, where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    TT_REQUIRE(allowed.count(it.key()) > 0, InvalidInput, "unknown key '" + it.key() + "' in " + where);
}

inline double log_or_neg_inf(double x) {
  TT_REQUIRE(x >= 0.0 && std::isfinite(x), InvalidInput, "matrix/probability entries must be finite and >= 0");
  return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

inline std::vector<std::vector<double>> square_matrix(const json& m, const std::string& name) {
  TT_REQUIRE(m.is_array() && !m.empty(), InvalidInput, name + " must be a non-empty array");
  std::vector<std::vector<double>> out;
  for (const auto& row : m) {
    TT_REQUIRE(row.is_array() && row.size() == m.size(), InvalidInput, name + " must be square");
    out.push_back(row.get<std::vector<double>>());
  }
  return out;
}

}  // namespace detail

inline std::optional<VariationBound> parse_bound(const json& d) {
  if (d.contains("holder")) {
    const auto& h = d.at("holder");
    detail::reject_unknown_keys(h, {"C", "r"}, "holder");
    return VariationBound::holder(h.at("C").get<double>(), h.at("r").get<double>());
  }
  if (d.contains("variation")) {
    const auto& v = d.at("variation");
    detail::reject_unknown_keys(v, {"table", "decay_ratio"}, "variation");
    std::optional<double> ratio;
    if (v.contains("decay_ratio")) ratio = v.at("decay_ratio").get<double>();
    return VariationBound::table(v.at("table").get<std::vector<double>>(), ratio);
  }
  return std::nullopt;
}

inline Potential potential_from_json(const json& d) {
  TT_REQUIRE(d.is_object() && d.contains("kind") && d.at("kind").is_string(), InvalidInput,
             "potential descriptor needs a string 'kind'");
  const std::string kind = d.at("kind").get<std::string>();
  if (kind == "reduced") {
    detail::reject_unknown_keys(d, {"kind", "base", "fill", "J", "tail_bound", "tail_heuristic"}, "reduced descriptor");
    const Potential base = potential_from_json(d.at("base"));
    ReferenceFill fill;
    if (d.contains("fill")) fill.symbols = d.at("fill").get<std::vector<int>>();
    const int J = d.contains("J") ? d.at("J").get<int>() : default_truncation(base);
    return reduce_to_one_sided(base, fill, J);
  }
  if (kind == "shifted") {
    detail::reject_unknown_keys(d, {"kind", "base", "constant"}, "shifted descriptor");
    return potential_from_json(d.at("base")).plus_constant(d.at("constant").get<double>());
  }
  detail::reject_unknown_keys(d, {"kind", "params", "holder", "variation"}, "potential descriptor");
  const json params = d.value("params", json::object());
  auto bound = parse_bound(d);

  if (kind == "markov1") {
    detail::reject_unknown_keys(params, {"matrix", "log_matrix"}, "markov1 params");
    std::vector<std::vector<double>> logm;
    if (params.contains("log_matrix")) {
      logm = detail::square_matrix(params.at("log_matrix"), "log_matrix");
    } else {
      TT_REQUIRE(params.contains("matrix"), InvalidInput, "markov1 needs params.matrix or params.log_matrix");
      logm = detail::square_matrix(params.at("matrix"), "matrix");
      for (auto& row : logm)
        for (auto& x : row) x = detail::log_or_neg_inf(x);
    }
    const int n = static_cast<int>(logm.size());
    BlockForm form{0, 2, [logm](std::span<const int> w) { return logm[w[0]][w[1]]; }};
    return Potential::block(n, std::move(form), bound, d);
  }
  if (kind == "bernoulli") {
    detail::reject_unknown_keys(params, {"p"}, "bernoulli params");
    auto p = params.at("p").get<std::vector<double>>();
    TT_REQUIRE(!p.empty(), InvalidInput, "bernoulli p must be non-empty");
    std::vector<double> lp;
    for (double x : p) lp.push_back(detail::log_or_neg_inf(x));
    BlockForm form{0, 1, [lp](std::span<const int> w) { return lp[w[0]]; }};
    return Potential::block(static_cast<int>(lp.size()), std::move(form), bound, d);
  }
  if (kind == "tabulated") {
    detail::reject_unknown_keys(params, {"alphabet", "first", "length", "values"}, "tabulated params");
    const int n = params.at("alphabet").get<int>();
    const int first = params.value("first", 0);
    const int length = params.value("length", 1);
    auto values = params.at("values").get<std::vector<double>>();
    TT_REQUIRE(n >= 1 && length >= 1, InvalidInput, "tabulated needs alphabet >= 1, length >= 1");
    TT_REQUIRE(std::pow(static_cast<double>(n), length) == static_cast<double>(values.size()), InvalidInput,
               "tabulated values must have alphabet^length entries");
    BlockForm form{first, length, [values, n](std::span<const int> w) {
                     std::size_t idx = 0;
                     for (int s : w) idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(s);
                     return values[idx];
                   }};
    return Potential::block(n, std::move(form), bound, d);
  }
  if (kind == "geometric_katok") {
    detail::reject_unknown_keys(params, {"t", "log_ju"}, "geometric_katok params");
    const double t = params.at("t").get<double>();
    auto lj = params.at("log_ju").get<std::vector<double>>();
    TT_REQUIRE(!lj.empty(), InvalidInput, "geometric_katok needs a non-empty log_ju table");
    BlockForm form{0, 1, [lj, t](std::span<const int> w) { return -t * lj[w[0]]; }};
    return Potential::block(static_cast<int>(lj.size()), std::move(form), bound, d);
  }
  if (kind == "constant") {
    detail::reject_unknown_keys(params, {"alphabet", "c"}, "constant params");
    const double c = params.value("c", 0.0);
    BlockForm form{0, 1, [c](std::span<const int>) { return c; }};
    return Potential::block(params.at("alphabet").get<int>(), std::move(form), bound, d);
  }
  throw InvalidInput("unknown potential kind '" + kind + "'");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  TT_REQUIRE(in.good(), InvalidInput, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

}  // namespace tower_thermo
