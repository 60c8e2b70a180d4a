#pragma once

// Truncated countable-alphabet shifts: words, two-sided sequences, potentials
// with variation metadata, Birkhoff sums.
//
// Variation indexing: V_n is the supremum of |Phi(a) - Phi(a')| over pairs that
// agree on coordinates -n+1 .. n-1 (a window of 2n-1 symbols centred at 0).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tower_thermo/error.hpp"

namespace tower_thermo {

using json = nlohmann::json;

struct Alphabet {
  int size = 1;
  std::vector<std::string> labels;

  explicit Alphabet(int n, std::vector<std::string> names = {}) : size(n), labels(std::move(names)) {
    TT_REQUIRE(size >= 1, InvalidInput, "alphabet size must be >= 1");
    TT_REQUIRE(labels.empty() || static_cast<int>(labels.size()) == size, InvalidInput,
               "alphabet labels must match size");
  }
  bool contains(int s) const { return s >= 0 && s < size; }
};

struct Word {
  std::vector<int> symbols;
  long anchor = 0;  // coordinate of symbols[0]

  long first() const { return anchor; }
  long last() const { return anchor + static_cast<long>(symbols.size()) - 1; }
  bool covers(long k) const { return k >= first() && k <= last(); }
  int at(long k) const { return symbols[static_cast<std::size_t>(k - anchor)]; }
};

// Past replacement (r_k)_{k<0}: r_{-1} = symbols[0], r_{-2} = symbols[1], ...;
// indices beyond the stored list repeat the last entry.
struct ReferenceFill {
  std::vector<int> symbols{0};

  int at(long k) const {  // k <= -1
    const auto idx = static_cast<std::size_t>(-k - 1);
    return idx < symbols.size() ? symbols[idx] : symbols.back();
  }
  void validate(const Alphabet& alpha) const {
    TT_REQUIRE(!symbols.empty(), InvalidInput, "reference fill must not be empty");
    for (int s : symbols) TT_REQUIRE(alpha.contains(s), InvalidInput, "reference fill symbol outside alphabet");
  }
};

// A two-sided sequence presented finitely: either periodic repetition of a
// body, or a window whose ends are repeated outward. An optional replaced past
// (coordinates < cut) models r(a).
class Sequence {
 public:
  enum class Mode { Periodic, RepeatEnds };

  static Sequence periodic(std::vector<int> period) {
    TT_REQUIRE(!period.empty(), InvalidInput, "periodic word must be non-empty");
    return Sequence(std::make_shared<const std::vector<int>>(std::move(period)), 0, Mode::Periodic);
  }
  static Sequence windowed(const Word& w) {
    TT_REQUIRE(!w.symbols.empty(), InvalidInput, "word must be non-empty");
    return Sequence(std::make_shared<const std::vector<int>>(w.symbols), w.anchor, Mode::RepeatEnds);
  }

  int at(long k) const {
    if (fill_ && k < cut_) return fill_->at(k - cut_);
    const long n = static_cast<long>(body_->size());
    long idx = k - offset_;
    if (mode_ == Mode::Periodic) {
      idx %= n;
      if (idx < 0) idx += n;
    } else {
      idx = std::clamp(idx, 0L, n - 1);
    }
    return (*body_)[static_cast<std::size_t>(idx)];
  }

  // sigma^j: (sigma^j a)_k = a_{k+j}
  Sequence shifted(long j) const {
    Sequence s = *this;
    s.offset_ -= j;
    s.cut_ -= j;
    return s;
  }

  // r(a): coordinates >= 0 kept, coordinates < 0 replaced by the fill.
  Sequence with_past(const ReferenceFill& fill) const {
    TT_REQUIRE(!fill_ || cut_ <= 0, std::logic_error, "nested past replacement across positive coordinates");
    Sequence s = *this;
    s.fill_ = std::make_shared<const ReferenceFill>(fill);
    s.cut_ = 0;
    return s;
  }

  Mode mode() const { return mode_; }
  const std::vector<int>& body() const { return *body_; }

 private:
  Sequence(std::shared_ptr<const std::vector<int>> body, long offset, Mode mode)
      : body_(std::move(body)), offset_(offset), mode_(mode) {}

  std::shared_ptr<const std::vector<int>> body_;
  long offset_ = 0;  // coordinate of body[0]
  Mode mode_;
  std::shared_ptr<const ReferenceFill> fill_;
  long cut_ = 0;
};

class PeriodicSequence {
 public:
  explicit PeriodicSequence(std::vector<int> period_word) : word_(std::move(period_word)) {
    TT_REQUIRE(!word_.empty(), InvalidInput, "period word must be non-empty");
  }
  int period() const { return static_cast<int>(word_.size()); }
  const std::vector<int>& word() const { return word_; }
  Sequence sequence() const { return Sequence::periodic(word_); }

 private:
  std::vector<int> word_;
};

// Declared upper bound on V_n.
class VariationBound {
 public:
  enum class Kind { Holder, Table, Function };

  static VariationBound holder(double C, double r) {
    TT_REQUIRE(C >= 0.0 && r > 0.0 && r < 1.0, InvalidInput, "holder bound needs C >= 0 and 0 < r < 1");
    VariationBound b(Kind::Holder);
    b.C_ = C;
    b.r_ = r;
    return b;
  }

  // Values V_1..V_m; beyond the table V_{m+k} = V_m * ratio^k (flagged heuristic).
  static VariationBound table(std::vector<double> values, std::optional<double> decay_ratio = std::nullopt) {
    TT_REQUIRE(!values.empty(), InvalidInput, "variation table must be non-empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
      TT_REQUIRE(values[i] >= 0.0 && std::isfinite(values[i]), InvalidInput, "variation entries must be finite and >= 0");
      TT_REQUIRE(i == 0 || values[i] <= values[i - 1], InvalidInput, "variation table must be nonincreasing");
    }
    if (decay_ratio) TT_REQUIRE(*decay_ratio >= 0.0 && *decay_ratio <= 1.0, InvalidInput, "decay ratio in [0,1]");
    VariationBound b(Kind::Table);
    b.values_ = std::move(values);
    b.ratio_ = decay_ratio;
    return b;
  }

  static VariationBound zero() { return table({0.0}, 0.0); }

  static VariationBound function(std::function<double(int)> fn, std::string label) {
    VariationBound b(Kind::Function);
    b.fn_ = std::move(fn);
    b.label_ = std::move(label);
    return b;
  }

  Kind kind() const { return kind_; }
  double holder_C() const { return C_; }
  double holder_r() const { return r_; }

  // V_n, n >= 1 (n <= 0 is clamped to 1).
  double operator()(int n) const {
    n = std::max(n, 1);
    switch (kind_) {
      case Kind::Holder:
        return C_ * std::pow(r_, n);
      case Kind::Table: {
        const auto m = static_cast<int>(values_.size());
        if (n <= m) return values_[static_cast<std::size_t>(n - 1)];
        if (values_.back() == 0.0) return 0.0;
        if (!ratio_) return values_.back();
        return values_.back() * std::pow(*ratio_, n - m);
      }
      case Kind::Function:
        return fn_(n);
    }
    return 0.0;
  }

  // sum_{j >= from} V_j; +inf when the declared data are not summable.
  double tail_sum(int from) const {
    from = std::max(from, 1);
    switch (kind_) {
      case Kind::Holder:
        return C_ * std::pow(r_, from) / (1.0 - r_);
      case Kind::Table: {
        const auto m = static_cast<int>(values_.size());
        double s = 0.0;
        for (int j = from; j <= m; ++j) s += values_[static_cast<std::size_t>(j - 1)];
        const double last = values_.back();
        if (last == 0.0) return s;
        if (!ratio_ || *ratio_ >= 1.0) return std::numeric_limits<double>::infinity();
        const int start = std::max(from, m + 1);
        return s + last * std::pow(*ratio_, start - m) / (1.0 - *ratio_);
      }
      case Kind::Function: {
        double s = 0.0;
        for (int j = from; j < from + 200000; ++j) {
          const double v = fn_(j);
          s += v;
          if (v == 0.0 || v < 1e-18 * s) return s;
        }
        return std::numeric_limits<double>::infinity();
      }
    }
    return 0.0;
  }

  bool heuristic_tail() const { return kind_ == Kind::Table && values_.back() > 0.0; }

  json to_json() const {
    switch (kind_) {
      case Kind::Holder:
        return json{{"C", C_}, {"r", r_}};
      case Kind::Table: {
        json j{{"table", values_}};
        if (ratio_) j["decay_ratio"] = *ratio_;
        return j;
      }
      case Kind::Function:
        return json{{"derived", label_}};
    }
    return {};
  }

 private:
  explicit VariationBound(Kind k) : kind_(k) {}
  Kind kind_;
  double C_ = 0.0, r_ = 0.5;
  std::vector<double> values_;
  std::optional<double> ratio_;
  std::function<double(int)> fn_;
  std::string label_;
};

// Potential depending on finitely many coordinates first .. first+length-1.
struct BlockForm {
  int first = 0;
  int length = 1;
  std::function<double(std::span<const int>)> fn;
};

// max - min of a block function over all N^length blocks (capped enumeration).
inline double block_oscillation(int alphabet_size, const BlockForm& form) {
  double total = 1.0;
  for (int i = 0; i < form.length; ++i) total *= alphabet_size;
  TT_REQUIRE(total <= 4e6, ResourceError, "block too large to enumerate for its oscillation; declare a bound");
  std::vector<int> w(static_cast<std::size_t>(form.length), 0);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  while (true) {
    const double v = form.fn(w);
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    int i = form.length - 1;
    while (i >= 0 && ++w[static_cast<std::size_t>(i)] == alphabet_size) w[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
  }
  return hi >= lo ? hi - lo : 0.0;
}

class Potential {
 public:
  using Eval = std::function<double(const Sequence&)>;

  static Potential general(int alphabet_size, Eval eval, VariationBound bound, bool one_sided, json descriptor) {
    Potential p(alphabet_size, std::move(bound), std::move(descriptor));
    p.eval_ = std::move(eval);
    p.one_sided_ = one_sided;
    return p;
  }

  static Potential block(int alphabet_size, BlockForm form, std::optional<VariationBound> bound, json descriptor) {
    TT_REQUIRE(form.length >= 1, InvalidInput, "block length must be >= 1");
    if (!bound) bound = VariationBound::table({block_oscillation(alphabet_size, form)});
    Potential p(alphabet_size, std::move(*bound), std::move(descriptor));
    p.one_sided_ = form.first >= 0;
    auto shared = std::make_shared<const BlockForm>(std::move(form));
    p.eval_ = [shared](const Sequence& a) {
      thread_local std::vector<int> buf;
      buf.resize(static_cast<std::size_t>(shared->length));
      for (int i = 0; i < shared->length; ++i) buf[static_cast<std::size_t>(i)] = a.at(shared->first + i);
      return shared->fn(buf);
    };
    p.block_ = shared;
    return p;
  }

  double operator()(const Sequence& a) const { return eval_(a); }

  int alphabet_size() const { return alphabet_size_; }
  bool one_sided() const { return one_sided_; }
  const BlockForm* block() const { return block_.get(); }
  const VariationBound& bound() const { return bound_; }
  const json& descriptor() const { return descriptor_; }
  std::string fill_convention() const { return "repeat_ends"; }

  // Declared V_n, sharpened to 0 when the block window lies inside -n+1..n-1.
  double variation(int n) const {
    if (block_ && block_->first >= -n + 1 && block_->first + block_->length - 1 <= n - 1) return 0.0;
    return bound_(n);
  }
  // sum_{j >= from} variation(j)
  double variation_tail(int from) const {
    from = std::max(from, 1);
    if (block_) {
      const int reach = std::max(-block_->first, block_->first + block_->length - 1);
      const int exact_from = reach + 1;  // V_j = 0 for j >= exact_from
      double s = 0.0;
      for (int j = from; j < exact_from; ++j) s += bound_(j);
      return s;
    }
    return bound_.tail_sum(from);
  }

  // Phi_n along the periodic orbit of `word`.
  double periodic_sum(std::span<const int> word, int n) const {
    const auto p = static_cast<long>(word.size());
    if (block_) {
      thread_local std::vector<int> buf;
      buf.resize(static_cast<std::size_t>(block_->length));
      double s = 0.0;
      for (long k = 0; k < n; ++k) {
        for (int i = 0; i < block_->length; ++i) {
          long idx = (k + block_->first + i) % p;
          if (idx < 0) idx += p;
          buf[static_cast<std::size_t>(i)] = word[static_cast<std::size_t>(idx)];
        }
        s += block_->fn(buf);
      }
      return s;
    }
    const Sequence a = Sequence::periodic(std::vector<int>(word.begin(), word.end()));
    double s = 0.0;
    for (long k = 0; k < n; ++k) s += eval_(a.shifted(k));
    return s;
  }

  // Same potential with a constant added.
  Potential plus_constant(double c) const {
    Potential q = *this;
    auto base = eval_;
    q.eval_ = [base, c](const Sequence& a) { return base(a) + c; };
    if (block_) {
      auto b = std::make_shared<BlockForm>(*block_);
      auto fn = block_->fn;
      b->fn = [fn, c](std::span<const int> w) { return fn(w) + c; };
      q.block_ = b;
    }
    q.descriptor_ = json{{"kind", "shifted"}, {"base", descriptor_}, {"constant", c}};
    return q;
  }

 private:
  Potential(int alphabet_size, VariationBound bound, json descriptor)
      : alphabet_size_(alphabet_size), bound_(std::move(bound)), descriptor_(std::move(descriptor)) {
    TT_REQUIRE(alphabet_size_ >= 1, InvalidInput, "alphabet size must be >= 1");
  }

  int alphabet_size_;
  VariationBound bound_;
  json descriptor_;
  Eval eval_;
  bool one_sided_ = false;
  std::shared_ptr<const BlockForm> block_;
};

inline void validate_word(std::span<const int> w, int alphabet_size) {
  for (int s : w)
    TT_REQUIRE(s >= 0 && s < alphabet_size, InvalidInput, "symbol " + std::to_string(s) + " outside alphabet");
}

inline double birkhoff_sum(const Potential& phi, const PeriodicSequence& a, int n) {
  TT_REQUIRE(n >= 1, InvalidInput, "birkhoff_sum needs n >= 1");
  validate_word(a.word(), phi.alphabet_size());
  return phi.periodic_sum(a.word(), n);
}

// Phi_{n+m}(a) = Phi_n(a) + Phi_m(sigma^n a), evaluated independently.
inline bool cocycle_check(const Potential& phi, const PeriodicSequence& a, int n, int m) {
  TT_REQUIRE(n >= 1 && m >= 1, InvalidInput, "cocycle_check needs n, m >= 1");
  validate_word(a.word(), phi.alphabet_size());
  const Sequence s = a.sequence();
  auto direct = [&](const Sequence& start, int len) {
    double acc = 0.0;
    for (int k = 0; k < len; ++k) acc += phi(start.shifted(k));
    return acc;
  };
  const double lhs = direct(s, n + m);
  const double rhs = direct(s, n) + direct(s.shifted(n), m);
  return std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs));
}

namespace detail {
inline std::vector<int> random_symbols(std::size_t len, int alphabet, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, alphabet - 1);
  std::vector<int> v(len);
  for (auto& s : v) s = d(rng);
  return v;
}
}  // namespace detail

// Sampled lower bound on V_n: pairs agree on -n+1..n-1 and are independent on
// a margin of `margin` symbols beyond, with ends repeated outward.
inline double estimate_variation(const Potential& phi, int n, int samples, std::uint64_t seed = 1, int margin = 24) {
  TT_REQUIRE(n >= 1 && samples >= 2, InvalidInput, "estimate_variation needs n >= 1 and samples >= 2");
  std::mt19937_64 rng(seed);
  const long R = n - 1 + margin;
  const auto len = static_cast<std::size_t>(2 * R + 1);
  double best = 0.0;
  for (int i = 0; i < samples; ++i) {
    auto a = detail::random_symbols(len, phi.alphabet_size(), rng);
    auto b = detail::random_symbols(len, phi.alphabet_size(), rng);
    for (long k = -(n - 1); k <= n - 1; ++k) b[static_cast<std::size_t>(k + R)] = a[static_cast<std::size_t>(k + R)];
    const double va = phi(Sequence::windowed(Word{a, -R}));
    const double vb = phi(Sequence::windowed(Word{b, -R}));
    best = std::max(best, std::abs(va - vb));
  }
  return best;
}

// Estimates for n = 1..n_max over nested sample sets: pairs drawn for level n+1
// also count toward level n, so the ladder is nonincreasing.
inline std::vector<double> estimate_variation_ladder(const Potential& phi, int n_max, int samples, std::uint64_t seed = 1) {
  std::vector<double> out(static_cast<std::size_t>(n_max), 0.0);
  double running = 0.0;
  for (int n = n_max; n >= 1; --n) {
    running = std::max(running, estimate_variation(phi, n, samples, seed + static_cast<std::uint64_t>(n)));
    out[static_cast<std::size_t>(n - 1)] = running;
  }
  return out;
}

}  // namespace tower_thermo
