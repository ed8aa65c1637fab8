#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "ovcost/cost_model.hpp"
#include "ovcost/numeric.hpp"
#include "ovcost/sources.hpp"

namespace ovc {

struct Codeword {
  Word symbols;
  Rational cost;  // string_cost_exact(cost_fn, symbols)

  double cost_value() const { return cost.get_d(); }
  friend bool operator==(const Codeword& a, const Codeword& b) { return a.symbols == b.symbols; }
};

// A materialized code on X^n: codewords indexed by the lexicographic index of
// the source string. Strings without a codeword are unencodable.
class Codebook {
 public:
  Codebook(int n, int source_alphabet, const CostFunction& cost_fn);

  int block_length() const { return n_; }
  int source_alphabet() const { return source_alphabet_; }
  int code_alphabet() const { return code_alphabet_; }
  std::uint64_t string_count() const { return entries_.size(); }
  std::size_t size() const { return reverse_.size(); }

  // Replaces any previous codeword of x. Cost is recomputed from the symbols.
  void assign(std::span<const int> x, Word symbols, const CostFunction& cost_fn);

  const Codeword* find(std::span<const int> x) const;
  const Codeword* at_index(std::uint64_t index) const;
  std::optional<Word> decode(std::span<const int> w) const;
  // Shortest prefix of `stream` that is a codeword: (x, symbols consumed).
  std::optional<std::pair<Word, std::size_t>> match_prefix(std::span<const int> stream) const;

  // Neither of any two distinct codewords is a prefix of the other, and no
  // codeword is repeated.
  bool is_prefix_free() const;
  std::size_t max_codeword_length() const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::uint64_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i]) fn(i, *entries_[i]);
    }
  }

 private:
  int n_;
  int source_alphabet_;
  int code_alphabet_;
  std::vector<std::optional<Codeword>> entries_;
  std::map<Word, std::uint64_t> reverse_;
};

struct EncoderOptions {
  // Largest |X|^n for which the codebook is materialized.
  std::uint64_t materialize_budget = std::uint64_t{1} << 16;
  // Allow on-the-fly encoding of i.i.d. sources beyond the budget.
  bool allow_streaming = true;
};

// Extra precision beyond -log2 P(x) carried by the interval arithmetic, and
// the guard band (relative to P(x)) inside which a comparison is refused.
inline constexpr mpfr_prec_t kGuardBits = 96;
inline constexpr mpfr_prec_t kExtraBits = 192;

// Cost-aware interval code. The channel splits an interval by the
// probabilities q(u|ctx) = K^(-alpha c(u|ctx)), which sum to one because alpha
// is the cost capacity. Source string x owns [F(x), F(x) + P(x)) in
// lexicographic order; its codeword follows the child containing the source
// midpoint until the channel interval fits inside the source interval. Every
// codeword then satisfies
//   c(phi(x)) <= -(1/alpha) log_K P(x) + (log_K 2)/alpha + c_max.
class IntervalEncoder {
 public:
  IntervalEncoder(SourceModel source, int n, CostFunction cost_fn, const CostCapacity& capacity,
                  EncoderOptions options = {});

  int block_length() const { return n_; }
  bool materialized() const { return codebook_.has_value(); }
  double alpha_c() const { return alpha_c_; }
  double c_max() const { return cost_fn_.c_max(); }
  // (log_K 2)/alpha_c + c_max.
  double cost_bound_slack() const;

  const SourceModel& source() const { return source_; }
  const CostFunction& cost_function() const { return cost_fn_; }
  // Throws InvalidInput for streaming encoders.
  const Codebook& codebook() const;

  // Throws UnencodableInput when P(x) = 0.
  Codeword encode(std::span<const int> x) const;
  // Throws DecodeFailure when w is not a codeword.
  Word decode(std::span<const int> w) const;
  // Reads the next codeword from a concatenated stream.
  std::pair<Word, std::size_t> decode_prefix(std::span<const int> stream) const;

 private:
  struct Channel;

  std::shared_ptr<const Channel> channel_for(mpfr_prec_t bits) const;
  Word encode_interval(const BigFloat& low, const BigFloat& width, bool certain, const Channel& ch) const;
  Word encode_interval_exact(const Rational& low, const Rational& width) const;
  Word encode_streaming(std::span<const int> x) const;
  std::pair<Word, std::size_t> decode_prefix_streaming(std::span<const int> stream) const;

  SourceModel source_;
  int n_;
  CostFunction cost_fn_;
  double alpha_c_;
  std::vector<double> alpha_per_context_;
  int cheapest_root_symbol_;
  // Every context has equal costs, so the channel is the K-adic tree and the
  // whole construction runs in exact rational arithmetic.
  bool kadic_channel_;
  std::optional<Codebook> codebook_;

  struct ChannelCache;
  std::shared_ptr<ChannelCache> cache_;
};

// Generalized Kraft sum sum_x K^(-alpha c(phi(x))), evaluated with 256-bit
// arithmetic, together with a structural certificate: the q-measure of the
// codeword leaves plus the q-measure of every unused branch of the code tree
// equals one, so the sum is at most one whenever the code is prefix-free.
struct KraftReport {
  double sum = 0.0;
  double unused_mass = 0.0;
  double identity_residual = 0.0;  // |sum + unused_mass - 1|
  bool prefix_free = false;
  bool certified = false;
};

double kraft_sum(const Codebook& codebook, const CostFunction& cost_fn, double alpha_c);
double kraft_sum(const IntervalEncoder& enc);
KraftReport kraft_report(const Codebook& codebook, const CostFunction& cost_fn);

struct CostBoundReport {
  double max_slack = 0.0;  // max_x c(phi(x)) + (1/alpha) log_K P(x)
  Word worst_x;
  double bound = 0.0;  // (log_K 2)/alpha + c_max
  std::size_t violations = 0;
  bool ok = true;
};

// Pointwise cost-bound audit of any codebook; does not throw on violation.
CostBoundReport measure_cost_slack(const Codebook& codebook, const SourceModel& source, const CostFunction& cost_fn,
                                   double alpha_c);
// Audit of a constructed encoder; throws ConstructionBug on any violation.
CostBoundReport certify_cost_bound(const IntervalEncoder& enc);

// Codebook transformations that keep the prefix condition. They produce the
// suboptimal codes used to exercise the converse bound.
Codebook permute_codewords(const Codebook& codebook, const CostFunction& cost_fn, std::uint64_t seed);
Codebook append_symbol(const Codebook& codebook, const CostFunction& cost_fn, int symbol);
// Swaps the codewords of the most and least probable encodable strings.
Codebook swap_extremes(const Codebook& codebook, const SourceModel& source, const CostFunction& cost_fn);

// One line per encodable string: "<x> <codeword> <cost to 12 decimals>".
void export_codebook(std::ostream& out, const Codebook& codebook);

// Packs binary code symbols MSB-first.
std::vector<std::uint8_t> pack_bits(std::span<const int> symbols);
Word unpack_bits(std::span<const std::uint8_t> bytes, std::size_t bit_count);

}  // namespace ovc
