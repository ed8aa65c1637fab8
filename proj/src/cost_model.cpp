#include "ovcost/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ovcost/errors.hpp"

namespace ovc {

namespace {

constexpr std::size_t kMaxContexts = std::size_t{1} << 20;

}  // namespace

CostFunction::CostFunction(int K, int depth, const std::map<Word, std::vector<Rational>>& table)
    : K_(K), depth_(depth) {
  if (K < 2) throw InvalidInput("code alphabet size K must be >= 2");
  if (depth < 0) throw InvalidInput("context depth must be >= 0");

  std::size_t count = 0;
  std::size_t level = 1;
  level_offset_.reserve(static_cast<std::size_t>(depth) + 1);
  for (int len = 0; len <= depth; ++len) {
    level_offset_.push_back(count);
    count += level;
    if (count > kMaxContexts) throw InvalidInput("cost table has too many contexts");
    level *= static_cast<std::size_t>(K);
  }
  context_count_ = count;

  exact_.resize(context_count_ * static_cast<std::size_t>(K));
  std::vector<bool> seen(context_count_, false);
  for (const auto& [ctx, costs] : table) {
    if (static_cast<int>(ctx.size()) > depth) {
      throw InvalidInput("context '" + context_label(ctx) + "' is longer than depth " +
                         std::to_string(depth));
    }
    for (int s : ctx) {
      if (s < 0 || s >= K) throw InvalidInput("context symbol out of range in '" + context_label(ctx) + "'");
    }
    if (static_cast<int>(costs.size()) != K) {
      throw InvalidInput("context '" + context_label(ctx) + "' needs exactly " + std::to_string(K) + " costs");
    }
    const std::size_t idx = context_index(ctx);
    for (int u = 0; u < K; ++u) {
      if (sgn(costs[u]) <= 0) {
        throw InvalidInput("cost entries must be strictly positive (context '" + context_label(ctx) + "')");
      }
      exact_[idx * K + u] = costs[u];
      exact_[idx * K + u].canonicalize();
    }
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < context_count_; ++i) {
    if (!seen[i]) {
      throw InvalidInput("cost table is missing context '" + context_label(contexts()[i]) + "'");
    }
  }

  values_.resize(exact_.size());
  c_max_exact_ = exact_.front();
  for (std::size_t i = 0; i < exact_.size(); ++i) {
    values_[i] = exact_[i].get_d();
    if (!std::isfinite(values_[i])) throw InvalidInput("cost entries must be finite");
    if (exact_[i] > c_max_exact_) c_max_exact_ = exact_[i];
  }
  c_max_ = c_max_exact_.get_d();
}

CostFunction CostFunction::memoryless(const std::vector<Rational>& costs) {
  return CostFunction(static_cast<int>(costs.size()), 0, {{Word{}, costs}});
}

CostFunction CostFunction::unit(int K) {
  return memoryless(std::vector<Rational>(static_cast<std::size_t>(std::max(K, 0)), Rational(1)));
}

std::size_t CostFunction::context_index(std::span<const int> context) const {
  if (static_cast<int>(context.size()) > depth_) throw InvalidInput("context longer than depth");
  std::size_t v = 0;
  for (int s : context) {
    if (s < 0 || s >= K_) throw InvalidInput("context symbol out of range");
    v = v * static_cast<std::size_t>(K_) + static_cast<std::size_t>(s);
  }
  return level_offset_[context.size()] + v;
}

std::size_t CostFunction::next_context_index(std::span<const int> prefix) const {
  const std::size_t len = std::min(prefix.size(), static_cast<std::size_t>(depth_));
  return context_index(prefix.subspan(prefix.size() - len));
}

std::size_t CostFunction::advance_context(std::size_t ctx, std::size_t emitted, int symbol) const {
  if (depth_ == 0) return 0;
  const std::size_t len = std::min(emitted, static_cast<std::size_t>(depth_));
  std::size_t v = ctx - level_offset_[len];
  const std::size_t K = static_cast<std::size_t>(K_);
  if (len == static_cast<std::size_t>(depth_)) {
    // Drop the oldest symbol.
    std::size_t top = 1;
    for (int i = 1; i < depth_; ++i) top *= K;
    v %= top;
    return level_offset_[len] + v * K + static_cast<std::size_t>(symbol);
  }
  return level_offset_[len + 1] + v * K + static_cast<std::size_t>(symbol);
}

std::vector<Word> CostFunction::contexts() const {
  std::vector<Word> out;
  out.reserve(context_count_);
  for (int len = 0; len <= depth_; ++len) {
    Word w(static_cast<std::size_t>(len), 0);
    while (true) {
      out.push_back(w);
      int pos = len - 1;
      while (pos >= 0 && w[pos] == K_ - 1) {
        w[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
      ++w[pos];
    }
  }
  return out;
}

const Rational& CostFunction::cost_exact(std::span<const int> context, int symbol) const {
  if (symbol < 0 || symbol >= K_) throw InvalidInput("code symbol out of range");
  return exact_[context_index(context) * K_ + symbol];
}

double CostFunction::cost(std::span<const int> context, int symbol) const {
  if (symbol < 0 || symbol >= K_) throw InvalidInput("code symbol out of range");
  return values_[context_index(context) * K_ + symbol];
}

std::span<const double> CostFunction::costs_at(std::size_t ctx) const {
  return std::span<const double>(values_).subspan(ctx * K_, static_cast<std::size_t>(K_));
}

std::span<const Rational> CostFunction::costs_exact_at(std::size_t ctx) const {
  return std::span<const Rational>(exact_).subspan(ctx * K_, static_cast<std::size_t>(K_));
}

std::string context_label(std::span<const int> context) {
  std::string s;
  for (int v : context) {
    if (v >= 0 && v <= 9) {
      s.push_back(static_cast<char>('0' + v));
    } else {
      s += "<" + std::to_string(v) + ">";
    }
  }
  return s;
}

double string_cost(const CostFunction& cost_fn, std::span<const int> u) {
  if (u.empty()) throw InvalidInput("string_cost needs a non-empty string");
  double total = 0.0;
  std::size_t ctx = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 0 || u[i] >= cost_fn.alphabet_size()) throw InvalidInput("code symbol out of range");
    total += cost_fn.costs_at(ctx)[u[i]];
    ctx = cost_fn.advance_context(ctx, i, u[i]);
  }
  return total;
}

Rational string_cost_exact(const CostFunction& cost_fn, std::span<const int> u) {
  if (u.empty()) throw InvalidInput("string_cost needs a non-empty string");
  Rational total = 0;
  std::size_t ctx = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 0 || u[i] >= cost_fn.alphabet_size()) throw InvalidInput("code symbol out of range");
    total += cost_fn.costs_exact_at(ctx)[u[i]];
    ctx = cost_fn.advance_context(ctx, i, u[i]);
  }
  return total;
}

namespace {

double kraft_term_sum(std::span<const double> costs, int K, double alpha) {
  double s = 0.0;
  for (double c : costs) s += std::pow(static_cast<double>(K), -alpha * c);
  return s;
}

}  // namespace

double capacity_residual(const CostFunction& cost_fn, std::span<const int> context, double alpha) {
  const auto costs = cost_fn.costs_at(cost_fn.context_index(context));
  return kraft_term_sum(costs, cost_fn.alphabet_size(), alpha) - 1.0;
}

double solve_context_capacity(const CostFunction& cost_fn, std::span<const int> context) {
  const auto costs = cost_fn.costs_at(cost_fn.context_index(context));
  const int K = cost_fn.alphabet_size();

  // Equal costs c give K * K^(-alpha c) = 1, i.e. alpha = 1/c exactly.
  if (std::all_of(costs.begin(), costs.end(), [&](double c) { return c == costs.front(); })) {
    return 1.0 / costs.front();
  }

  double lo = 1e-300;
  double hi = 1.0;
  while (kraft_term_sum(costs, K, hi) >= 1.0) {
    lo = hi;
    hi *= 2.0;
  }
  // Bisect past the 1e-12 tolerance down to adjacent doubles.
  for (int iter = 0; iter < 2000; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double s = kraft_term_sum(costs, K, mid);
    if (s == 1.0) return mid;
    if (s > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

BigFloat solve_context_capacity_precise(const CostFunction& cost_fn, std::span<const int> context,
                                        mpfr_prec_t bits) {
  const std::size_t idx = cost_fn.context_index(context);
  const auto costs = cost_fn.costs_exact_at(idx);
  const int K = cost_fn.alphabet_size();
  const mpfr_prec_t work = bits + 32;

  std::vector<BigFloat> c;
  c.reserve(costs.size());
  for (const auto& q : costs) c.emplace_back(q, work);

  if (std::all_of(costs.begin(), costs.end(), [&](const Rational& q) { return q == costs.front(); })) {
    BigFloat one(1L, work);
    return one / c.front();
  }

  const BigFloat lnK = log(BigFloat(static_cast<long>(K), work));
  BigFloat alpha(solve_context_capacity(cost_fn, context), work);
  const BigFloat one(1L, work);
  // f(alpha) = sum K^(-alpha c) - 1 is convex and decreasing, so Newton from
  // the double-precision root converges quadratically.
  for (int iter = 0; iter < 64; ++iter) {
    BigFloat f(work);
    BigFloat df(work);
    for (const auto& ci : c) {
      const BigFloat term = exp(-(alpha * ci * lnK));
      f += term;
      df -= term * ci * lnK;
    }
    f -= one;
    const BigFloat step = f / df;
    alpha -= step;
    if (step.is_zero() || mpfr_get_exp(step.get()) < mpfr_get_exp(alpha.get()) - static_cast<mpfr_exp_t>(bits) - 4) {
      break;
    }
  }
  BigFloat out(bits);
  mpfr_set(out.get(), alpha.get(), MPFR_RNDN);
  return out;
}

CostCapacity solve_cost_capacity(const CostFunction& cost_fn, double uniformity_tol) {
  if (!(uniformity_tol > 0.0)) throw InvalidInput("uniformity tolerance must be > 0");
  CostCapacity cap;
  cap.uniformity_tolerance = uniformity_tol;
  const auto ctxs = cost_fn.contexts();
  for (const auto& ctx : ctxs) cap.per_context_roots[ctx] = solve_context_capacity(cost_fn, ctx);

  // Reference value: first context of full depth.
  const Word& reference = *std::find_if(ctxs.begin(), ctxs.end(), [&](const Word& w) {
    return static_cast<int>(w.size()) == cost_fn.depth();
  });
  cap.alpha_c = cap.per_context_roots.at(reference);

  std::vector<CapacityNotUniform::Offender> offenders;
  for (const auto& [ctx, root] : cap.per_context_roots) {
    if (std::fabs(root - cap.alpha_c) > uniformity_tol) offenders.push_back({context_label(ctx), root});
  }
  if (!offenders.empty()) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "cost capacity is not uniform across contexts (reference '" << context_label(reference)
        << "' root " << cap.alpha_c << "):";
    for (const auto& o : offenders) msg << " ['" << o.context << "' -> " << o.root << "]";
    throw CapacityNotUniform(msg.str(), std::move(offenders));
  }
  return cap;
}

}  // namespace ovc
