#include "ovcost/overflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ovcost/errors.hpp"

namespace ovc {

namespace {

constexpr mpfr_prec_t kBoundBits = 256;
constexpr long kTieExponent = -200;

BigFloat big(double v) { return BigFloat(v, kBoundBits); }
BigFloat big(const Rational& q) { return BigFloat(q, kBoundBits); }

// K^(-alpha eta) at 256 bits.
BigFloat cost_scale(double eta, double alpha_c, int K) { return pow_base(K, -(big(alpha_c) * big(eta))); }

void check_z(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw InvalidInput("z must be positive and finite");
}

void check_eta(double eta) {
  if (!std::isfinite(eta)) throw InvalidInput("eta must be finite");
}

// Pr{P(X) <= threshold} by direct enumeration; ties within the guard band are
// counted in the event.
double enumerated_mass_at_most(const SourceModel& src, int n, const BigFloat& threshold) {
  const BigFloat hi = threshold + ldexp(abs(threshold), kTieExponent);
  Rational mass = 0;
  src.enumerate_exact(n, [&](std::span<const int>, const Rational& p) {
    if (sgn(p) > 0 && big(p) <= hi) mass += p;
  });
  return mass.get_d();
}

}  // namespace

// ThresholdSchedule -----------------------------------------------------------

ThresholdSchedule ThresholdSchedule::first_order(double R) {
  if (!std::isfinite(R)) throw InvalidInput("rate R must be finite");
  ThresholdSchedule s;
  s.kind_ = Kind::FirstOrder;
  s.r_ = R;
  return s;
}

ThresholdSchedule ThresholdSchedule::second_order(double a, double L) {
  if (!std::isfinite(a) || !std::isfinite(L)) throw InvalidInput("a and L must be finite");
  ThresholdSchedule s;
  s.kind_ = Kind::SecondOrder;
  s.a_ = a;
  s.l_ = L;
  return s;
}

ThresholdSchedule ThresholdSchedule::explicit_table(std::map<int, double> table) {
  ThresholdSchedule s;
  s.kind_ = Kind::Explicit;
  s.table_ = std::move(table);
  return s;
}

double ThresholdSchedule::eta(int n) const {
  if (n < 1) throw InvalidInput("block length must be positive");
  double v = 0.0;
  switch (kind_) {
    case Kind::FirstOrder:
      v = n * r_;
      break;
    case Kind::SecondOrder:
      v = n * a_ + std::sqrt(static_cast<double>(n)) * l_;
      break;
    case Kind::Explicit: {
      const auto it = table_.find(n);
      if (it == table_.end()) throw InvalidInput("no threshold given for n = " + std::to_string(n));
      v = it->second;
      break;
    }
  }
  if (!std::isfinite(v) || v <= 0.0) {
    throw InvalidInput("threshold eta_n must be positive and finite (n = " + std::to_string(n) + ")");
  }
  return v;
}

std::string ThresholdSchedule::describe() const {
  switch (kind_) {
    case Kind::FirstOrder:
      return "first_order(R=" + format_real(r_) + ")";
    case Kind::SecondOrder:
      return "second_order(a=" + format_real(a_) + ",L=" + format_real(l_) + ")";
    case Kind::Explicit: {
      std::string s = "explicit(";
      bool first = true;
      for (const auto& [n, eta] : table_) {
        if (!first) s += ";";
        s += std::to_string(n) + ":" + format_real(eta);
        first = false;
      }
      return s + ")";
    }
  }
  return "";
}

// Exact overflow ------------------------------------------------------------------

Rational overflow_exact_rational(const Codebook& codebook, const SourceModel& src, double eta) {
  check_eta(eta);
  if (codebook.source_alphabet() != src.alphabet_size()) throw InvalidInput("codebook and source alphabets differ");
  const Rational limit = rational_from_double(eta);
  Rational mass = 0;
  std::uint64_t idx = 0;
  src.enumerate_exact(codebook.block_length(), [&](std::span<const int>, const Rational& p) {
    const Codeword* cw = codebook.at_index(idx++);
    if (cw != nullptr && cw->cost > limit) mass += p;
  });
  return mass;
}

double overflow_exact(const Codebook& codebook, const SourceModel& src, double eta) {
  return overflow_exact_rational(codebook, src, eta).get_d();
}

double overflow_exact(const IntervalEncoder& enc, const SourceModel& src, double eta) {
  return overflow_exact(enc.codebook(), src, eta);
}

// Monte Carlo -----------------------------------------------------------------------

double ci95_of(double p, std::uint64_t trials) {
  if (trials == 0) return 0.0;
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

namespace {

struct McCounts {
  std::uint64_t overflow = 0;
  std::uint64_t lemma1_event = 0;  // z P <= K^(-alpha eta)
  std::uint64_t lemma2_event = 0;  // P <= z K^(-alpha eta)
  std::uint64_t encoded = 0;
};

McCounts sample_point(const IntervalEncoder& enc, const SourceModel& src, double eta, double z, std::uint64_t trials,
                      std::uint64_t seed) {
  if (trials == 0) throw InvalidInput("trials must be at least 1");
  check_eta(eta);
  const int n = enc.block_length();
  const int K = enc.cost_function().alphabet_size();
  const double alpha = enc.alpha_c();
  const double slack = enc.cost_bound_slack();
  const Rational limit = rational_from_double(eta);
  const double log_z = z > 0.0 ? std::log(z) / std::log(static_cast<double>(K)) : 0.0;
  const double a_eta = alpha * eta;

  McCounts counts;
  Rng rng(seed);
  Word x;
  for (std::uint64_t t = 0; t < trials; ++t) {
    src.sample_into(rng, n, x);
    const double iota = src.self_information(x, K);
    if (!std::isfinite(iota)) throw ConstructionBug("sampled a string of probability zero");
    const double lo = iota / alpha;
    const double tol = 1e-9 * std::max(1.0, lo);
    bool over;
    if (lo > eta + tol) {
      over = true;
    } else if (lo + slack < eta - tol) {
      over = false;
    } else {
      over = enc.encode(x).cost > limit;
      ++counts.encoded;
    }
    if (over) ++counts.overflow;
    if (z > 0.0) {
      // z P <= K^(-alpha eta)  <=>  iota >= alpha eta + log_K z.
      if (iota >= a_eta + log_z - 1e-12 * std::max(1.0, iota)) ++counts.lemma1_event;
      // P <= z K^(-alpha eta)  <=>  iota >= alpha eta - log_K z.
      if (iota >= a_eta - log_z - 1e-12 * std::max(1.0, iota)) ++counts.lemma2_event;
    }
  }
  return counts;
}

}  // namespace

McEstimate overflow_mc(const IntervalEncoder& enc, const SourceModel& src, double eta, std::uint64_t trials,
                       std::uint64_t seed) {
  const McCounts c = sample_point(enc, src, eta, 0.0, trials, seed);
  McEstimate e;
  e.trials = trials;
  e.seed = seed;
  e.estimate = static_cast<double>(c.overflow) / static_cast<double>(trials);
  e.ci95 = ci95_of(e.estimate, trials);
  e.encoded = c.encoded;
  return e;
}

OverflowBracket overflow_bracket_count(const SourceModel& src, int n, int K, double alpha_c, double slack,
                                       double eta) {
  check_eta(eta);
  if (!(alpha_c > 0.0) || !(slack >= 0.0)) throw InvalidInput("alpha_c must be positive and slack non-negative");
  const CountSpectrum cs = count_spectrum(src, n, K);
  long double lower = 0.0L;
  long double upper = 0.0L;
  for (int k = 0; k <= n; ++k) {
    if (cs.mass[k] <= 0.0) continue;
    const double c_lo = cs.self_info[k] / alpha_c;
    if (c_lo > eta) lower += cs.mass[k];
    if (c_lo + slack > eta) upper += cs.mass[k];
  }
  return OverflowBracket{std::min(1.0, static_cast<double>(lower)), std::min(1.0, static_cast<double>(upper))};
}

// Bound values --------------------------------------------------------------------

double lemma1_penalty(double z, double alpha_c, double c_max, int K) {
  return z * std::pow(static_cast<double>(K), alpha_c * c_max + 1.0);
}

double lemma1_penalty_tight(double z, double alpha_c, double c_max, int K) {
  return 2.0 * z * std::pow(static_cast<double>(K), alpha_c * c_max);
}

BigFloat lemma2_threshold(double eta, double z, double alpha_c, int K) {
  check_z(z);
  return big(z) * cost_scale(eta, alpha_c, K);
}

BigFloat lemma1_threshold(double eta, double z, double alpha_c, int K) {
  check_z(z);
  return cost_scale(eta, alpha_c, K) / big(z);
}

double lemma1_rhs(const SourceModel& src, double eta, double z, double alpha_c, double c_max, int n, int K) {
  check_eta(eta);
  const double prob = enumerated_mass_at_most(src, n, lemma1_threshold(eta, z, alpha_c, K));
  return prob + lemma1_penalty(z, alpha_c, c_max, K);
}

double lemma2_rhs(const SourceModel& src, double eta, double z, double alpha_c, int n, int K) {
  check_eta(eta);
  const double prob = enumerated_mass_at_most(src, n, lemma2_threshold(eta, z, alpha_c, K));
  return prob - z;
}

// ExactBoundTable -----------------------------------------------------------------

ExactBoundTable::ExactBoundTable(const Codebook& codebook, const SourceModel& src, int n, std::uint64_t budget) {
  if (codebook.block_length() != n || codebook.source_alphabet() != src.alphabet_size()) {
    throw InvalidInput("codebook does not match the source and block length");
  }
  std::vector<Rational> probs;
  std::uint64_t idx = 0;
  src.enumerate_exact(
      n,
      [&](std::span<const int>, const Rational& p) {
        const Codeword* cw = codebook.at_index(idx++);
        if (sgn(p) <= 0) return;
        probs.push_back(p);
        if (cw != nullptr) by_cost_.emplace_back(cw->cost, p);
      },
      budget);

  std::sort(by_cost_.begin(), by_cost_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  cost_tail_.assign(by_cost_.size() + 1, Rational(0));
  for (std::size_t i = by_cost_.size(); i-- > 0;) cost_tail_[i] = cost_tail_[i + 1] + by_cost_[i].second;

  std::sort(probs.begin(), probs.end());
  prob_head_.assign(probs.size() + 1, Rational(0));
  by_prob_.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    prob_head_[i + 1] = prob_head_[i] + probs[i];
    by_prob_.emplace_back(probs[i], kBoundBits);
  }
}

Rational ExactBoundTable::overflow(double eta) const {
  check_eta(eta);
  const Rational limit = rational_from_double(eta);
  const auto it = std::upper_bound(by_cost_.begin(), by_cost_.end(), limit,
                                   [](const Rational& v, const auto& e) { return v < e.first; });
  return cost_tail_[static_cast<std::size_t>(it - by_cost_.begin())];
}

ExactBoundTable::Event ExactBoundTable::mass_at_most(const BigFloat& threshold) const {
  const BigFloat band = ldexp(abs(threshold), kTieExponent);
  const BigFloat lo = threshold - band;
  const BigFloat hi = threshold + band;
  auto count_at_most = [&](const BigFloat& t) {
    return static_cast<std::size_t>(
        std::partition_point(by_prob_.begin(), by_prob_.end(), [&](const BigFloat& p) { return p <= t; }) -
        by_prob_.begin());
  };
  const std::size_t upper = count_at_most(hi);
  const std::size_t lower = count_at_most(lo);
  return Event{prob_head_[upper], upper - lower};
}

// Sweeps --------------------------------------------------------------------------

double ZRule::z(int n, int K) const {
  if (!(value > 0.0) || !std::isfinite(value)) throw InvalidInput("z rule parameter must be positive");
  switch (kind) {
    case Kind::Direct:
      return std::pow(static_cast<double>(K), -std::sqrt(static_cast<double>(n)) * value);
    case Kind::Converse:
      return std::pow(static_cast<double>(K), -static_cast<double>(n) * value);
    case Kind::Fixed:
      return value;
  }
  return value;
}

std::string ZRule::describe() const {
  switch (kind) {
    case Kind::Direct:
      return "direct(gamma=" + format_real(value) + ")";
    case Kind::Converse:
      return "converse(gamma=" + format_real(value) + ")";
    case Kind::Fixed:
      return "fixed(z=" + format_real(value) + ")";
  }
  return "";
}

BoundReport evaluate_exact(const ExactBoundTable& table, int n, double eta, double z, double alpha_c, double c_max,
                           int K) {
  check_z(z);
  BoundReport r;
  r.n = n;
  r.eta = eta;
  r.z = z;
  r.exact = true;

  const Rational over = table.overflow(eta);
  const auto e1 = table.mass_at_most(lemma1_threshold(eta, z, alpha_c, K));
  const auto e2 = table.mass_at_most(lemma2_threshold(eta, z, alpha_c, K));
  r.ties = e1.ties + e2.ties;

  const BigFloat measured = big(over);
  const BigFloat l1 = big(e1.probability) + big(lemma1_penalty(z, alpha_c, c_max, K));
  const BigFloat l2 = big(e2.probability) - big(z);
  r.measured = over.get_d();
  r.lemma1_rhs = l1.to_double();
  r.lemma1_rhs_tight = (big(e1.probability) + big(lemma1_penalty_tight(z, alpha_c, c_max, K))).to_double();
  r.lemma2_rhs = l2.to_double();
  r.pass1 = measured < l1;
  r.pass2 = measured >= l2 - ldexp(BigFloat(1L, kBoundBits), kTieExponent);
  return r;
}

std::vector<BoundReport> verify_bounds(const SourceModel& src, const CostFunction& cost_fn,
                                       const CostCapacity& capacity, const ThresholdSchedule& schedule,
                                       const std::vector<int>& n_list, const ZRule& z_rule,
                                       const VerifyOptions& options) {
  if (n_list.empty()) throw InvalidInput("verify_bounds needs at least one block length");
  const int K = cost_fn.alphabet_size();
  std::vector<int> ns = n_list;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

  std::vector<BoundReport> reports;
  for (int n : ns) {
    if (n < 1) throw InvalidInput("block lengths must be positive");
    const double eta = schedule.eta(n);
    const double z = z_rule.z(n, K);
    check_z(z);

    const std::uint64_t strings = count_strings(src.alphabet_size(), n);
    const std::uint64_t exact_limit = std::min(options.enumeration_budget, options.encoder.materialize_budget);
    bool exact = false;
    switch (options.method) {
      case Method::Exact:
        if (strings > options.enumeration_budget) {
          throw EnumerationTooLarge("exact evaluation at n = " + std::to_string(n) + " exceeds the enumeration budget");
        }
        exact = true;
        break;
      case Method::MonteCarlo:
        exact = false;
        break;
      case Method::Auto:
        exact = strings <= exact_limit;
        break;
    }
    if (!exact && options.corrupt) throw InvalidInput("codebook corruption requires exact evaluation");

    EncoderOptions enc_opts = options.encoder;
    if (exact) enc_opts.materialize_budget = std::max(enc_opts.materialize_budget, strings);
    const IntervalEncoder enc(src, n, cost_fn, capacity, enc_opts);

    BoundReport r;
    if (exact) {
      const Codebook& built = enc.codebook();
      std::optional<Codebook> corrupted;
      if (options.corrupt) corrupted = options.corrupt(built, src, cost_fn);
      const Codebook& cb = corrupted ? *corrupted : built;
      const ExactBoundTable table(cb, src, n, options.enumeration_budget);
      r = evaluate_exact(table, n, eta, z, capacity.alpha_c, cost_fn.c_max(), K);
      r.cost_bound_certified = measure_cost_slack(cb, src, cost_fn, capacity.alpha_c).ok;
    } else {
      const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(n);
      const McCounts c = sample_point(enc, src, eta, z, options.trials, seed);
      const double trials = static_cast<double>(options.trials);
      r.n = n;
      r.eta = eta;
      r.z = z;
      r.exact = false;
      r.trials = options.trials;
      r.seed = seed;
      r.measured = static_cast<double>(c.overflow) / trials;
      r.ci95 = ci95_of(r.measured, options.trials);
      const double p1 = static_cast<double>(c.lemma1_event) / trials;
      const double p2 = static_cast<double>(c.lemma2_event) / trials;
      r.lemma1_rhs = p1 + lemma1_penalty(z, capacity.alpha_c, cost_fn.c_max(), K);
      r.lemma1_rhs_tight = p1 + lemma1_penalty_tight(z, capacity.alpha_c, cost_fn.c_max(), K);
      r.lemma2_rhs = p2 - z;
      r.pass1 = r.measured - r.ci95 < r.lemma1_rhs;
      r.pass2 = r.measured + r.ci95 >= r.lemma2_rhs;
    }
    reports.push_back(r);
  }
  return reports;
}

void write_bound_rows(std::ostream& out, const std::vector<BoundReport>& reports) {
  out << kBoundCsvHeader << '\n';
  for (const auto& r : reports) {
    out << r.n << ',' << format_real(r.eta) << ',' << format_real(r.measured) << ',' << format_real(r.ci95) << ','
        << format_real(r.lemma1_rhs) << ',' << format_real(r.lemma2_rhs) << ',' << format_real(r.z) << ','
        << (r.pass1 ? "true" : "false") << ',' << (r.pass2 ? "true" : "false") << '\n';
  }
}

}  // namespace ovc
