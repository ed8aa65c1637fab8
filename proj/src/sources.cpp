#include "ovcost/sources.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ovcost/errors.hpp"

namespace ovc {

namespace {

constexpr double kSumTolerance = 1e-12;

// Validates and canonicalizes p in place.
void check_distribution(std::vector<Rational>& p, const char* what) {
  if (p.empty()) throw InvalidInput(std::string(what) + " is empty");
  Rational total = 0;
  for (auto& v : p) {
    v.canonicalize();
    if (sgn(v) < 0 || v > 1) throw InvalidInput(std::string(what) + " has an entry outside [0, 1]");
    total += v;
  }
  if (std::fabs(Rational(total - 1).get_d()) > kSumTolerance) {
    throw InvalidInput(std::string(what) + " does not sum to 1");
  }
}

std::vector<double> to_doubles(const std::vector<Rational>& p) {
  std::vector<double> out(p.size());
  std::transform(p.begin(), p.end(), out.begin(), [](const Rational& q) { return q.get_d(); });
  return out;
}

std::vector<double> cumulative_of(const std::vector<double>& p) {
  std::vector<double> c(p.size());
  std::partial_sum(p.begin(), p.end(), c.begin());
  return c;
}

std::vector<double> logs_of(const std::vector<double>& p) {
  std::vector<double> out(p.size());
  std::transform(p.begin(), p.end(), out.begin(), [](double v) {
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
  });
  return out;
}

// First index i with u < cumulative[i]; falls back to the last symbol with
// positive mass when rounding leaves u above the final cumulative value.
int draw_categorical(std::span<const double> cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it != cumulative.end()) return static_cast<int>(it - cumulative.begin());
  for (std::size_t i = cumulative.size(); i-- > 0;) {
    const double prev = i == 0 ? 0.0 : cumulative[i - 1];
    if (cumulative[i] > prev) return static_cast<int>(i);
  }
  return 0;
}

double log_sum_exp(std::span<const double> terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

void check_symbols(std::span<const int> x, int alphabet) {
  for (int s : x) {
    if (s < 0 || s >= alphabet) throw InvalidInput("source symbol out of alphabet range");
  }
}

}  // namespace

SelfInfoStats self_info_stats(std::span<const double> pmf, int base_K) {
  if (base_K < 2) throw InvalidInput("log base K must be >= 2");
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("pmf entries must lie in [0, 1]");
    total += p;
  }
  if (std::fabs(total - 1.0) > kSumTolerance) throw InvalidInput("pmf does not sum to 1");
  const double lnK = std::log(static_cast<double>(base_K));
  SelfInfoStats st;
  for (double p : pmf) {
    if (p > 0.0) st.entropy -= p * std::log(p) / lnK;
  }
  for (double p : pmf) {
    if (p > 0.0) {
      const double d = -std::log(p) / lnK - st.entropy;
      st.sigma2 += p * d * d;
    }
  }
  return st;
}

SourceModel SourceModel::iid(std::vector<Rational> pmf) {
  check_distribution(pmf, "pmf");
  Iid body;
  body.pmf = to_doubles(pmf);
  body.cumulative = cumulative_of(body.pmf);
  body.log_pmf = logs_of(body.pmf);
  body.exact = std::move(pmf);
  const int alphabet = static_cast<int>(body.exact.size());
  return SourceModel(alphabet, std::move(body));
}

SourceModel SourceModel::bernoulli(const Rational& p) { return iid({Rational(1 - p), p}); }

SourceModel SourceModel::markov(std::vector<Rational> initial, std::vector<std::vector<Rational>> transition) {
  check_distribution(initial, "initial distribution");
  const std::size_t m = initial.size();
  if (transition.size() != m) throw InvalidInput("transition matrix must be |X| x |X|");
  for (auto& row : transition) {
    if (row.size() != m) throw InvalidInput("transition matrix must be |X| x |X|");
    check_distribution(row, "transition row");
  }
  Markov body;
  body.initial = to_doubles(initial);
  body.initial_cumulative = cumulative_of(body.initial);
  body.log_initial = logs_of(body.initial);
  for (const auto& row : transition) {
    const auto d = to_doubles(row);
    const auto c = cumulative_of(d);
    const auto l = logs_of(d);
    body.transition.insert(body.transition.end(), d.begin(), d.end());
    body.transition_cumulative.insert(body.transition_cumulative.end(), c.begin(), c.end());
    body.log_transition.insert(body.log_transition.end(), l.begin(), l.end());
  }
  body.initial_exact = std::move(initial);
  body.transition_exact = std::move(transition);
  return SourceModel(static_cast<int>(m), std::move(body));
}

SourceModel SourceModel::mixture(std::vector<std::pair<Rational, SourceModel>> components) {
  if (components.empty()) throw InvalidInput("mixture needs at least one component");
  const int alphabet = components.front().second.alphabet_size();
  std::vector<Rational> weights;
  Mixture body;
  for (auto& [w, model] : components) {
    if (model.alphabet_size() != alphabet) throw InvalidInput("mixture components must share one alphabet");
    w.canonicalize();
    weights.push_back(w);
    body.components.push_back({w, std::make_shared<const SourceModel>(std::move(model))});
  }
  check_distribution(weights, "mixture weights");
  body.weights = to_doubles(weights);
  body.cumulative = cumulative_of(body.weights);
  return SourceModel(alphabet, std::move(body));
}

SourceModel::Kind SourceModel::kind() const {
  if (std::holds_alternative<Iid>(body_)) return Kind::Iid;
  if (std::holds_alternative<Markov>(body_)) return Kind::Markov;
  return Kind::Mixture;
}

std::span<const Rational> SourceModel::pmf_exact() const {
  const auto* b = std::get_if<Iid>(&body_);
  if (b == nullptr) throw InvalidInput("pmf is only defined for i.i.d. sources");
  return b->exact;
}

std::span<const double> SourceModel::pmf() const {
  const auto* b = std::get_if<Iid>(&body_);
  if (b == nullptr) throw InvalidInput("pmf is only defined for i.i.d. sources");
  return b->pmf;
}

std::span<const double> SourceModel::initial() const { return std::get<Markov>(body_).initial; }

std::span<const double> SourceModel::transition_row(int from) const {
  const auto& b = std::get<Markov>(body_);
  return std::span<const double>(b.transition).subspan(static_cast<std::size_t>(from) * alphabet_,
                                                       static_cast<std::size_t>(alphabet_));
}

const std::vector<Rational>& SourceModel::initial_exact() const { return std::get<Markov>(body_).initial_exact; }

const std::vector<std::vector<Rational>>& SourceModel::transition_exact() const {
  return std::get<Markov>(body_).transition_exact;
}

const std::vector<SourceModel::Component>& SourceModel::components() const {
  const auto* b = std::get_if<Mixture>(&body_);
  if (b == nullptr) throw InvalidInput("components are only defined for mixtures");
  return b->components;
}

bool SourceModel::is_iid_mixture() const {
  if (std::holds_alternative<Iid>(body_)) return true;
  if (const auto* m = std::get_if<Mixture>(&body_)) {
    return std::all_of(m->components.begin(), m->components.end(),
                       [](const Component& c) { return c.model->is_iid_mixture(); });
  }
  return false;
}

Rational SourceModel::probability_exact(std::span<const int> x) const {
  if (x.empty()) throw InvalidInput("probability needs n >= 1");
  check_symbols(x, alphabet_);
  return std::visit(
      [&](const auto& b) -> Rational {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Iid>) {
          Rational p = 1;
          for (int s : x) {
            p *= b.exact[s];
            if (sgn(p) == 0) break;
          }
          return p;
        } else if constexpr (std::is_same_v<T, Markov>) {
          Rational p = b.initial_exact[x[0]];
          for (std::size_t i = 1; i < x.size() && sgn(p) != 0; ++i) p *= b.transition_exact[x[i - 1]][x[i]];
          return p;
        } else {
          Rational p = 0;
          for (const auto& c : b.components) p += c.weight * c.model->probability_exact(x);
          return p;
        }
      },
      body_);
}

double SourceModel::log_probability(std::span<const int> x) const {
  if (x.empty()) throw InvalidInput("probability needs n >= 1");
  check_symbols(x, alphabet_);
  return std::visit(
      [&](const auto& b) -> double {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Iid>) {
          double l = 0.0;
          for (int s : x) l += b.log_pmf[s];
          return l;
        } else if constexpr (std::is_same_v<T, Markov>) {
          const std::size_t m = static_cast<std::size_t>(alphabet_);
          double l = b.log_initial[x[0]];
          for (std::size_t i = 1; i < x.size(); ++i) l += b.log_transition[x[i - 1] * m + x[i]];
          return l;
        } else {
          std::vector<double> terms;
          terms.reserve(b.components.size());
          for (std::size_t i = 0; i < b.components.size(); ++i) {
            if (b.weights[i] > 0.0) terms.push_back(std::log(b.weights[i]) + b.components[i].model->log_probability(x));
          }
          return log_sum_exp(terms);
        }
      },
      body_);
}

double SourceModel::probability(std::span<const int> x) const { return std::exp(log_probability(x)); }

double SourceModel::self_information(std::span<const int> x, int base_K) const {
  return -log_probability(x) / std::log(static_cast<double>(base_K));
}

namespace {

// ln P(x) for any binary string with k ones out of n; -inf when P(x) = 0.
double log_prob_with_ones(const SourceModel& src, int n, int k) {
  if (src.kind() == SourceModel::Kind::Iid) {
    const auto p = src.pmf();
    auto term = [](double q, int m) { return m == 0 ? 0.0 : m * std::log(q); };
    return term(p[0], n - k) + term(p[1], k);
  }
  std::vector<double> terms;
  for (const auto& c : src.components()) {
    const double w = c.weight.get_d();
    if (w > 0.0) terms.push_back(std::log(w) + log_prob_with_ones(*c.model, n, k));
  }
  return log_sum_exp(terms);
}

}  // namespace

bool has_count_spectrum(const SourceModel& src) { return src.alphabet_size() == 2 && src.is_iid_mixture(); }

CountSpectrum count_spectrum(const SourceModel& src, int n, int base_K) {
  if (!has_count_spectrum(src)) throw InvalidInput("count spectrum needs a binary i.i.d. source or mixture thereof");
  if (n < 1) throw InvalidInput("count spectrum needs n >= 1");
  CountSpectrum cs;
  cs.n = n;
  cs.mass.resize(static_cast<std::size_t>(n) + 1);
  cs.self_info.resize(static_cast<std::size_t>(n) + 1);
  const double ln_k = std::log(static_cast<double>(base_K));
  const double lgn = std::lgamma(n + 1.0);
  for (int k = 0; k <= n; ++k) {
    const double lp = log_prob_with_ones(src, n, k);
    const double lchoose = lgn - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    cs.mass[k] = std::isinf(lp) ? 0.0 : std::exp(lchoose + lp);
    cs.self_info[k] = -lp / ln_k;
  }
  return cs;
}

std::uint64_t count_strings(int alphabet, int n) {
  std::uint64_t total = 1;
  for (int i = 0; i < n; ++i) {
    if (total > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(alphabet)) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= static_cast<std::uint64_t>(alphabet);
  }
  return total;
}

std::uint64_t lexicographic_index(std::span<const int> x, int alphabet) {
  std::uint64_t idx = 0;
  for (int s : x) idx = idx * static_cast<std::uint64_t>(alphabet) + static_cast<std::uint64_t>(s);
  return idx;
}

Word string_at(std::uint64_t index, int alphabet, int n) {
  Word x(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    x[i] = static_cast<int>(index % static_cast<std::uint64_t>(alphabet));
    index /= static_cast<std::uint64_t>(alphabet);
  }
  return x;
}

namespace {

template <typename Visit>
void for_each_string(int alphabet, int n, std::uint64_t budget, Visit&& visit) {
  if (n < 1) throw InvalidInput("enumeration needs n >= 1");
  const std::uint64_t total = count_strings(alphabet, n);
  if (total > budget) {
    throw EnumerationTooLarge("|X|^n = " + std::to_string(alphabet) + "^" + std::to_string(n) +
                              " exceeds the enumeration budget of " + std::to_string(budget) +
                              "; use a Monte Carlo method instead");
  }
  Word x(static_cast<std::size_t>(n), 0);
  for (std::uint64_t k = 0; k < total; ++k) {
    visit(std::span<const int>(x));
    for (int pos = n - 1; pos >= 0; --pos) {
      if (++x[pos] < alphabet) break;
      x[pos] = 0;
    }
  }
}

}  // namespace

void SourceModel::enumerate(int n, const std::function<void(std::span<const int>, double)>& visit,
                            std::uint64_t budget) const {
  for_each_string(alphabet_, n, budget, [&](std::span<const int> x) { visit(x, probability(x)); });
}

void SourceModel::enumerate_exact(int n, const std::function<void(std::span<const int>, const Rational&)>& visit,
                                  std::uint64_t budget) const {
  for_each_string(alphabet_, n, budget, [&](std::span<const int> x) { visit(x, probability_exact(x)); });
}

void SourceModel::sample_into(Rng& rng, int n, Word& out) const {
  if (n < 1) throw InvalidInput("sample needs n >= 1");
  out.resize(static_cast<std::size_t>(n));
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Iid>) {
          for (auto& s : out) s = draw_categorical(b.cumulative, uniform01(rng));
        } else if constexpr (std::is_same_v<T, Markov>) {
          const std::size_t m = static_cast<std::size_t>(alphabet_);
          out[0] = draw_categorical(b.initial_cumulative, uniform01(rng));
          for (std::size_t i = 1; i < out.size(); ++i) {
            const auto row = std::span<const double>(b.transition_cumulative).subspan(out[i - 1] * m, m);
            out[i] = draw_categorical(row, uniform01(rng));
          }
        } else {
          const int c = draw_categorical(b.cumulative, uniform01(rng));
          b.components[c].model->sample_into(rng, n, out);
        }
      },
      body_);
}

Word SourceModel::sample(int n, std::uint64_t seed) const {
  Rng rng(seed);
  Word out;
  sample_into(rng, n, out);
  return out;
}

}  // namespace ovc
