#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ovcost/coder.hpp"

namespace ovc {

// Cost threshold eta_n as a function of the block length.
class ThresholdSchedule {
 public:
  enum class Kind { FirstOrder, SecondOrder, Explicit };

  static ThresholdSchedule first_order(double R);
  static ThresholdSchedule second_order(double a, double L);
  static ThresholdSchedule explicit_table(std::map<int, double> table);

  Kind kind() const { return kind_; }
  double rate() const { return r_; }
  double a() const { return a_; }
  double L() const { return l_; }
  const std::map<int, double>& table() const { return table_; }

  // eta_n = nR, na + sqrt(n) L, or the table entry; throws InvalidInput when
  // the value is missing, non-positive or non-finite.
  double eta(int n) const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::FirstOrder;
  double r_ = 0.0;
  double a_ = 0.0;
  double l_ = 0.0;
  std::map<int, double> table_;
};

// Exact overflow Pr{c(phi(X^n)) > eta}, costs and eta compared as rationals.
// Strings without a codeword are left out of the event.
Rational overflow_exact_rational(const Codebook& codebook, const SourceModel& src, double eta);
double overflow_exact(const Codebook& codebook, const SourceModel& src, double eta);
// Requires a materialized encoder.
double overflow_exact(const IntervalEncoder& enc, const SourceModel& src, double eta);

struct McEstimate {
  double estimate = 0.0;
  double ci95 = 0.0;  // 1.96 sqrt(p(1-p)/trials)
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  // Samples whose overflow status needed a full encoding (the rest are decided
  // by the certified cost bracket of the constructed code).
  std::uint64_t encoded = 0;
};

double ci95_of(double p, std::uint64_t trials);

// Monte Carlo overflow of the constructed encoder. Codeword costs lie in
// [iota/alpha, iota/alpha + slack), so a sample is only encoded when eta falls
// inside that bracket.
McEstimate overflow_mc(const IntervalEncoder& enc, const SourceModel& src, double eta, std::uint64_t trials,
                       std::uint64_t seed);

// Exact bracket on the overflow of the constructed code for sources with a
// count spectrum (binary i.i.d. and mixtures), at any n: every codeword cost
// lies in [iota/alpha, iota/alpha + slack), hence
//   Pr{iota/alpha > eta} <= overflow <= Pr{iota/alpha + slack > eta}.
struct OverflowBracket {
  double lower = 0.0;
  double upper = 0.0;
};
OverflowBracket overflow_bracket_count(const SourceModel& src, int n, int K, double alpha_c, double slack, double eta);

// Additive term of the achievability bound: the proof constant
// z K^(alpha c_max + 1), and the tighter z K^(alpha c_max) * 2.
double lemma1_penalty(double z, double alpha_c, double c_max, int K);
double lemma1_penalty_tight(double z, double alpha_c, double c_max, int K);

// Pr{z P(X^n) <= K^(-alpha eta)} + z K^(alpha c_max + 1), by enumeration.
double lemma1_rhs(const SourceModel& src, double eta, double z, double alpha_c, double c_max, int n, int K);
// Pr{P(X^n) <= z K^(-alpha eta)} - z, by enumeration. Not clamped.
double lemma2_rhs(const SourceModel& src, double eta, double z, double alpha_c, int n, int K);

// Exhaustive table of one code on one source, sorted once so that every
// (eta, z) query costs a couple of binary searches. Probabilities are exact
// rationals; the comparisons P(x) vs z^(+-1) K^(-alpha eta) are made at 256
// bits, and values within a relative 2^-200 of the threshold count as ties
// (the non-strict inequality then holds).
class ExactBoundTable {
 public:
  ExactBoundTable(const Codebook& codebook, const SourceModel& src, int n,
                  std::uint64_t budget = kDefaultEnumerationBudget);

  Rational overflow(double eta) const;
  struct Event {
    Rational probability;
    std::size_t ties = 0;
  };
  // Pr{P(X) <= threshold}.
  Event mass_at_most(const BigFloat& threshold) const;

  std::size_t support_size() const { return by_prob_.size(); }

 private:
  std::vector<std::pair<Rational, Rational>> by_cost_;  // (cost, P), ascending cost
  std::vector<Rational> cost_tail_;                     // mass of entries [i, end)
  std::vector<BigFloat> by_prob_;                       // P ascending, 256 bits
  std::vector<Rational> prob_head_;                     // mass of entries [0, i)
};

// z K^(-alpha eta) and K^(-alpha eta) / z at 256 bits.
BigFloat lemma2_threshold(double eta, double z, double alpha_c, int K);
BigFloat lemma1_threshold(double eta, double z, double alpha_c, int K);

struct ZRule {
  enum class Kind { Direct, Converse, Fixed };
  Kind kind = Kind::Direct;
  double value = 0.1;  // gamma, or z itself for Fixed

  // Direct: K^(-sqrt(n) gamma); Converse: K^(-n gamma); Fixed: value.
  double z(int n, int K) const;
  std::string describe() const;
};

struct BoundReport {
  int n = 0;
  double eta = 0.0;
  double measured = 0.0;
  double ci95 = 0.0;  // zero for exact evaluation
  double lemma1_rhs = 0.0;
  double lemma1_rhs_tight = 0.0;
  double lemma2_rhs = 0.0;
  double z = 0.0;
  bool pass1 = false;  // measured < lemma1_rhs
  bool pass2 = false;  // measured >= lemma2_rhs
  bool exact = true;
  std::size_t ties = 0;
  // Pointwise cost bound of the evaluated codebook.
  bool cost_bound_certified = true;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
};

enum class Method { Auto, Exact, MonteCarlo };

struct VerifyOptions {
  Method method = Method::Auto;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  EncoderOptions encoder;
  std::uint64_t enumeration_budget = kDefaultEnumerationBudget;
  // Replaces the constructed codebook before evaluation (test hook for
  // deliberately bad codes). Requires exact evaluation.
  std::function<Codebook(const Codebook&, const SourceModel&, const CostFunction&)> corrupt;
};

// Builds the encoder for every n and evaluates overflow and both bounds.
// The achievability bound is only a claim about the constructed code; under
// `corrupt` its check is still reported but a failure there is expected.
std::vector<BoundReport> verify_bounds(const SourceModel& src, const CostFunction& cost_fn,
                                       const CostCapacity& capacity, const ThresholdSchedule& schedule,
                                       const std::vector<int>& n_list, const ZRule& z_rule,
                                       const VerifyOptions& options = {});

// Evaluates one (eta, z) point on an exhaustive table.
BoundReport evaluate_exact(const ExactBoundTable& table, int n, double eta, double z, double alpha_c, double c_max,
                           int K);

inline constexpr const char* kBoundCsvHeader = "n,eta,measured,ci95,lemma1_rhs,lemma2_rhs,z,pass1,pass2";
void write_bound_rows(std::ostream& out, const std::vector<BoundReport>& reports);

}  // namespace ovc
