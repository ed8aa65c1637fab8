#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "ovcost/numeric.hpp"

namespace ovc {

inline constexpr std::uint64_t kDefaultEnumerationBudget = std::uint64_t{1} << 22;

// Portable generator: mt19937_64 raw output is fully specified by the
// standard. Distributions are implemented here rather than taken from <random>
// so that sample streams agree across standard libraries.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct SelfInfoStats {
  double entropy = 0.0;  // base-K units per symbol
  double sigma2 = 0.0;   // variance of the self-information
};

// H = sum p log_K(1/p), sigma2 = sum p (-log_K p - H)^2, zero-mass symbols skipped.
SelfInfoStats self_info_stats(std::span<const double> pmf, int base_K);

// General source realized as i.i.d., first-order Markov, or a finite mixture of
// block distributions. Immutable once built; copies share mixture components.
class SourceModel {
 public:
  enum class Kind { Iid, Markov, Mixture };

  struct Component {
    Rational weight;
    std::shared_ptr<const SourceModel> model;
  };

  static SourceModel iid(std::vector<Rational> pmf);
  static SourceModel markov(std::vector<Rational> initial, std::vector<std::vector<Rational>> transition);
  static SourceModel mixture(std::vector<std::pair<Rational, SourceModel>> components);

  // Convenience for tests: Bernoulli(p) on {0,1} with P(1) = p.
  static SourceModel bernoulli(const Rational& p);

  Kind kind() const;
  int alphabet_size() const { return alphabet_; }

  // i.i.d. accessors (throw for other kinds).
  std::span<const Rational> pmf_exact() const;
  std::span<const double> pmf() const;
  // Markov accessors.
  std::span<const double> initial() const;
  std::span<const double> transition_row(int from) const;
  const std::vector<Rational>& initial_exact() const;
  const std::vector<std::vector<Rational>>& transition_exact() const;
  // Mixture accessor.
  const std::vector<Component>& components() const;

  // Exact P_{X^n}(x) and its double counterpart.
  Rational probability_exact(std::span<const int> x) const;
  double probability(std::span<const int> x) const;
  // Natural log of P(x); -inf for zero probability.
  double log_probability(std::span<const int> x) const;
  // -log_K P(x); +inf for zero probability.
  double self_information(std::span<const int> x, int base_K) const;

  // Visits every string of length n once, lexicographically, with its
  // probability. Throws EnumerationTooLarge when |X|^n > budget.
  void enumerate(int n, const std::function<void(std::span<const int>, double)>& visit,
                 std::uint64_t budget = kDefaultEnumerationBudget) const;
  void enumerate_exact(int n, const std::function<void(std::span<const int>, const Rational&)>& visit,
                       std::uint64_t budget = kDefaultEnumerationBudget) const;

  // Deterministic given the seed. Mixtures draw one component per sequence.
  Word sample(int n, std::uint64_t seed) const;
  void sample_into(Rng& rng, int n, Word& out) const;

  // True for IID sources and (recursively) mixtures of IID sources.
  bool is_iid_mixture() const;

 private:
  struct Iid {
    std::vector<Rational> exact;
    std::vector<double> pmf;
    std::vector<double> cumulative;
    std::vector<double> log_pmf;
  };
  struct Markov {
    std::vector<Rational> initial_exact;
    std::vector<std::vector<Rational>> transition_exact;
    std::vector<double> initial;
    std::vector<double> initial_cumulative;
    std::vector<double> log_initial;
    std::vector<double> transition;  // row-major |X| x |X|
    std::vector<double> transition_cumulative;
    std::vector<double> log_transition;
  };
  struct Mixture {
    std::vector<Component> components;
    std::vector<double> weights;
    std::vector<double> cumulative;
  };

  SourceModel(int alphabet, std::variant<Iid, Markov, Mixture> body)
      : alphabet_(alphabet), body_(std::move(body)) {}

  int alphabet_;
  std::variant<Iid, Markov, Mixture> body_;
};

// Binary sources whose block probability depends only on the number of ones
// (i.i.d. and mixtures of i.i.d.). For each count k: the total mass of the
// strings with k ones and their common self-information -log_K P(x).
struct CountSpectrum {
  int n = 0;
  std::vector<double> mass;
  std::vector<double> self_info;  // +inf where P(x) = 0
};

bool has_count_spectrum(const SourceModel& src);
// Throws InvalidInput when !has_count_spectrum(src).
CountSpectrum count_spectrum(const SourceModel& src, int n, int base_K);

// Number of strings |X|^n, or nullopt-like saturation at UINT64_MAX.
std::uint64_t count_strings(int alphabet, int n);

// Lexicographic index of x among all length-|x| strings, and its inverse.
std::uint64_t lexicographic_index(std::span<const int> x, int alphabet);
Word string_at(std::uint64_t index, int alphabet, int n);

}  // namespace ovc
