#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ovcost/numeric.hpp"

namespace ovc {

// Conditional cost c(u | context) on a K-ary code alphabet where the context is
// the most recent min(i, depth) code symbols. Entries exist for every context
// of length 0..depth, so strings shorter than the memory use truncated
// contexts. Costs are kept as exact rationals with a double mirror.
class CostFunction {
 public:
  // `table` maps a context (length 0..depth) to its K per-symbol costs.
  CostFunction(int K, int depth, const std::map<Word, std::vector<Rational>>& table);

  // Memoryless cost: one context (the empty one).
  static CostFunction memoryless(const std::vector<Rational>& costs);
  static CostFunction unit(int K);

  int alphabet_size() const { return K_; }
  int depth() const { return depth_; }

  // `context` is the conditioning suffix itself (length <= depth).
  const Rational& cost_exact(std::span<const int> context, int symbol) const;
  double cost(std::span<const int> context, int symbol) const;

  const Rational& c_max_exact() const { return c_max_exact_; }
  double c_max() const { return c_max_; }

  // All contexts ordered by length, then lexicographically.
  std::vector<Word> contexts() const;
  // Dense index of a context, in the order of contexts().
  std::size_t context_index(std::span<const int> context) const;
  std::size_t context_count() const { return context_count_; }
  // Context in effect for the next symbol after having emitted `prefix`.
  std::size_t next_context_index(std::span<const int> prefix) const;
  // Transition of the dense context index after emitting `symbol`, where
  // `emitted` is the number of symbols emitted before it.
  std::size_t advance_context(std::size_t ctx, std::size_t emitted, int symbol) const;

  // Costs of the K symbols under the context with the given dense index.
  std::span<const double> costs_at(std::size_t ctx) const;
  std::span<const Rational> costs_exact_at(std::size_t ctx) const;

 private:
  int K_;
  int depth_;
  std::size_t context_count_;
  std::vector<std::size_t> level_offset_;  // first dense index of each length
  std::vector<Rational> exact_;            // context_count * K
  std::vector<double> values_;
  Rational c_max_exact_;
  double c_max_;
};

std::string context_label(std::span<const int> context);

// Sum of conditional costs of u, each symbol conditioned on the most recent
// min(i-1, depth) symbols.
double string_cost(const CostFunction& cost_fn, std::span<const int> u);
Rational string_cost_exact(const CostFunction& cost_fn, std::span<const int> u);

// Root tolerance of the double-precision solver.
inline constexpr double kCapacityTolerance = 1e-12;
inline constexpr double kDefaultUniformityTolerance = 1e-9;

// Unique alpha > 0 with sum_u K^(-alpha c(u|context)) = 1.
double solve_context_capacity(const CostFunction& cost_fn, std::span<const int> context);
// Same root refined by Newton iteration to roughly `bits` bits.
BigFloat solve_context_capacity_precise(const CostFunction& cost_fn, std::span<const int> context,
                                        mpfr_prec_t bits);

// sum_u K^(-alpha c(u|context)) - 1.
double capacity_residual(const CostFunction& cost_fn, std::span<const int> context, double alpha);

struct CostCapacity {
  double alpha_c = 0.0;
  std::map<Word, double> per_context_roots;
  double tolerance = kCapacityTolerance;
  double uniformity_tolerance = kDefaultUniformityTolerance;
};

// Solves the capacity equation for every context. Throws CapacityNotUniform
// when the roots disagree by more than `uniformity_tol`.
CostCapacity solve_cost_capacity(const CostFunction& cost_fn,
                                 double uniformity_tol = kDefaultUniformityTolerance);

}  // namespace ovc
