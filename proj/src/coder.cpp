#include "ovcost/coder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>

#include "ovcost/errors.hpp"

namespace ovc {

// Codebook -------------------------------------------------------------------

Codebook::Codebook(int n, int source_alphabet, const CostFunction& cost_fn)
    : n_(n), source_alphabet_(source_alphabet), code_alphabet_(cost_fn.alphabet_size()) {
  if (n < 1) throw InvalidInput("block length must be >= 1");
  const std::uint64_t total = count_strings(source_alphabet, n);
  if (total > (std::uint64_t{1} << 26)) throw EnumerationTooLarge("codebook too large to materialize");
  entries_.resize(static_cast<std::size_t>(total));
}

void Codebook::assign(std::span<const int> x, Word symbols, const CostFunction& cost_fn) {
  if (static_cast<int>(x.size()) != n_) throw InvalidInput("source string has the wrong block length");
  if (symbols.empty()) throw InvalidInput("codewords must be non-empty");
  const std::uint64_t idx = lexicographic_index(x, source_alphabet_);
  if (auto& old = entries_[idx]) reverse_.erase(old->symbols);
  Codeword cw{std::move(symbols), 0};
  cw.cost = string_cost_exact(cost_fn, cw.symbols);
  reverse_[cw.symbols] = idx;
  entries_[idx] = std::move(cw);
}

const Codeword* Codebook::find(std::span<const int> x) const {
  if (static_cast<int>(x.size()) != n_) throw InvalidInput("source string has the wrong block length");
  for (int s : x) {
    if (s < 0 || s >= source_alphabet_) throw InvalidInput("source symbol out of alphabet range");
  }
  return at_index(lexicographic_index(x, source_alphabet_));
}

const Codeword* Codebook::at_index(std::uint64_t index) const {
  if (index >= entries_.size()) return nullptr;
  const auto& e = entries_[index];
  return e ? &*e : nullptr;
}

std::optional<Word> Codebook::decode(std::span<const int> w) const {
  const auto it = reverse_.find(Word(w.begin(), w.end()));
  if (it == reverse_.end()) return std::nullopt;
  return string_at(it->second, source_alphabet_, n_);
}

std::optional<std::pair<Word, std::size_t>> Codebook::match_prefix(std::span<const int> stream) const {
  const std::size_t limit = std::min(stream.size(), max_codeword_length());
  Word prefix;
  prefix.reserve(limit);
  for (std::size_t k = 0; k < limit; ++k) {
    prefix.push_back(stream[k]);
    const auto it = reverse_.find(prefix);
    if (it != reverse_.end()) return std::make_pair(string_at(it->second, source_alphabet_, n_), k + 1);
  }
  return std::nullopt;
}

bool Codebook::is_prefix_free() const {
  std::size_t assigned = 0;
  for (const auto& e : entries_) assigned += e.has_value() ? 1 : 0;
  if (assigned != reverse_.size()) return false;  // a codeword is shared
  // In lexicographic order a prefix relation, if any, shows up between
  // neighbours.
  const Word* prev = nullptr;
  for (const auto& [w, idx] : reverse_) {
    if (prev != nullptr && prev->size() <= w.size() && std::equal(prev->begin(), prev->end(), w.begin())) {
      return false;
    }
    prev = &w;
  }
  return true;
}

std::size_t Codebook::max_codeword_length() const {
  std::size_t m = 0;
  for (const auto& [w, idx] : reverse_) m = std::max(m, w.size());
  return m;
}

// IntervalEncoder ------------------------------------------------------------

struct IntervalEncoder::Channel {
  mpfr_prec_t bits;
  // cumulative[ctx][u] = q(0|ctx) + ... + q(u|ctx) for u = 0..K-2.
  std::vector<std::vector<BigFloat>> cumulative;
};

struct IntervalEncoder::ChannelCache {
  std::mutex mutex;
  std::map<mpfr_prec_t, std::shared_ptr<const Channel>> by_bits;
};

namespace {

mpfr_prec_t round_bits(double bits) {
  const double b = std::ceil(std::max(bits, 0.0)) + static_cast<double>(kExtraBits);
  return static_cast<mpfr_prec_t>((static_cast<long>(b) + 63) / 64 * 64);
}

int guarded_compare(const BigFloat& x, const BigFloat& y, const BigFloat& guard) {
  const int c = compare(x, y);
  if (c == 0) return 0;
  if (abs(x - y) < guard) {
    throw PrecisionGuard("interval endpoint comparison within the guard band of equality");
  }
  return c;
}

}  // namespace

IntervalEncoder::IntervalEncoder(SourceModel source, int n, CostFunction cost_fn, const CostCapacity& capacity,
                                 EncoderOptions options)
    : source_(std::move(source)),
      n_(n),
      cost_fn_(std::move(cost_fn)),
      alpha_c_(capacity.alpha_c),
      cheapest_root_symbol_(0),
      kadic_channel_(true),
      cache_(std::make_shared<ChannelCache>()) {
  if (n < 1) throw InvalidInput("block length must be >= 1");
  if (!(alpha_c_ > 0.0)) throw InvalidInput("cost capacity must be positive");

  const int K = cost_fn_.alphabet_size();
  for (const auto& ctx : cost_fn_.contexts()) {
    alpha_per_context_.push_back(solve_context_capacity(cost_fn_, ctx));
    const auto costs = cost_fn_.costs_exact_at(cost_fn_.context_index(ctx));
    if (!std::all_of(costs.begin(), costs.end(), [&](const Rational& c) { return c == costs.front(); })) {
      kadic_channel_ = false;
    }
  }
  const auto root_costs = cost_fn_.costs_exact_at(0);
  for (int u = 1; u < K; ++u) {
    if (root_costs[u] < root_costs[cheapest_root_symbol_]) cheapest_root_symbol_ = u;
  }

  const std::uint64_t total = count_strings(source_.alphabet_size(), n);
  if (total <= options.materialize_budget) {
    codebook_.emplace(n, source_.alphabet_size(), cost_fn_);

    double max_bits = 0.0;
    source_.enumerate(
        n,
        [&](std::span<const int> x, double) {
          const double l = source_.log_probability(x);
          if (std::isfinite(l)) max_bits = std::max(max_bits, -l / std::log(2.0));
        },
        options.materialize_budget);
    const auto channel = kadic_channel_ ? nullptr : channel_for(round_bits(max_bits));

    Rational cumulative = 0;
    source_.enumerate_exact(
        n,
        [&](std::span<const int> x, const Rational& p) {
          if (sgn(p) > 0) {
            Word w;
            if (kadic_channel_) {
              w = encode_interval_exact(cumulative, p);
            } else {
              const mpfr_prec_t bits = channel->bits;
              w = encode_interval(BigFloat(cumulative, bits), BigFloat(p, bits), p == 1, *channel);
            }
            codebook_->assign(x, std::move(w), cost_fn_);
          }
          cumulative += p;
        },
        options.materialize_budget);
  } else if (!options.allow_streaming || source_.kind() != SourceModel::Kind::Iid) {
    throw EnumerationTooLarge("|X|^n exceeds the materialization budget and streaming is only available for "
                              "i.i.d. sources");
  }
}

double IntervalEncoder::cost_bound_slack() const {
  const double K = static_cast<double>(cost_fn_.alphabet_size());
  return std::log(2.0) / std::log(K) / alpha_c_ + cost_fn_.c_max();
}

const Codebook& IntervalEncoder::codebook() const {
  if (!codebook_) throw InvalidInput("codebook is not materialized for this encoder");
  return *codebook_;
}

std::shared_ptr<const IntervalEncoder::Channel> IntervalEncoder::channel_for(mpfr_prec_t bits) const {
  std::lock_guard<std::mutex> lock(cache_->mutex);
  if (auto it = cache_->by_bits.find(bits); it != cache_->by_bits.end()) return it->second;

  auto ch = std::make_shared<Channel>();
  ch->bits = bits;
  const int K = cost_fn_.alphabet_size();
  const BigFloat lnK = log(BigFloat(static_cast<long>(K), bits + 32));
  for (const auto& ctx : cost_fn_.contexts()) {
    const BigFloat alpha = solve_context_capacity_precise(cost_fn_, ctx, bits + 32);
    const auto costs = cost_fn_.costs_exact_at(cost_fn_.context_index(ctx));
    std::vector<BigFloat> cum;
    BigFloat acc(bits + 32);
    for (int u = 0; u + 1 < K; ++u) {
      acc += exp(-(alpha * BigFloat(costs[u], bits + 32) * lnK));
      BigFloat rounded(bits);
      mpfr_set(rounded.get(), acc.get(), MPFR_RNDN);
      cum.push_back(std::move(rounded));
    }
    ch->cumulative.push_back(std::move(cum));
  }
  cache_->by_bits.emplace(bits, ch);
  return ch;
}

Word IntervalEncoder::encode_interval(const BigFloat& low, const BigFloat& width, bool certain,
                                      const Channel& ch) const {
  if (certain) return {cheapest_root_symbol_};
  const int K = cost_fn_.alphabet_size();
  const mpfr_prec_t bits = ch.bits;
  const BigFloat high = low + width;
  const BigFloat mid = low + ldexp(width, -1);
  const BigFloat guard = ldexp(width, -static_cast<long>(kGuardBits));

  BigFloat lo(0L, bits);
  BigFloat hi(1L, bits);
  std::size_t ctx = 0;
  Word out;
  const std::size_t limit = static_cast<std::size_t>(bits) * 4 + 64;
  while (true) {
    const BigFloat w = hi - lo;
    BigFloat prev = lo;
    BigFloat next(bits);
    int chosen = K - 1;
    for (int u = 0; u < K; ++u) {
      if (u + 1 == K) {
        next = hi;
      } else {
        next = lo + w * ch.cumulative[ctx][u];
      }
      // The midpoint on a boundary goes to the lower child.
      if (guarded_compare(mid, next, guard) <= 0) {
        chosen = u;
        break;
      }
      prev = next;
    }
    lo = std::move(prev);
    hi = std::move(next);
    ctx = cost_fn_.advance_context(ctx, out.size(), chosen);
    out.push_back(chosen);
    if (guarded_compare(lo, low, guard) >= 0 && guarded_compare(hi, high, guard) <= 0) break;
    if (out.size() > limit) throw ConstructionBug("interval code did not terminate");
  }
  return out;
}

Word IntervalEncoder::encode_interval_exact(const Rational& low, const Rational& width) const {
  if (width == 1) return {cheapest_root_symbol_};
  const int K = cost_fn_.alphabet_size();
  const Rational high = low + width;
  const Rational mid = low + width / 2;
  Rational lo = 0;
  Rational w = 1;
  Word out;
  while (true) {
    w /= K;
    // First child whose closed interval reaches the midpoint.
    Rational t = (mid - lo) / w;
    mpz_class idx = t.get_num() / t.get_den();  // floor for t >= 0
    if (idx * t.get_den() == t.get_num() && idx > 0) idx -= 1;
    int u = static_cast<int>(std::min<long>(idx.get_si(), K - 1));
    lo += w * u;
    out.push_back(u);
    if (lo >= low && lo + w <= high) break;
    if (out.size() > 100000) throw ConstructionBug("interval code did not terminate");
  }
  return out;
}

Codeword IntervalEncoder::encode(std::span<const int> x) const {
  if (static_cast<int>(x.size()) != n_) throw InvalidInput("source string has the wrong block length");
  if (codebook_) {
    const Codeword* cw = codebook_->find(x);
    if (cw == nullptr) throw UnencodableInput("source string has zero probability");
    return *cw;
  }
  Codeword cw{encode_streaming(x), 0};
  cw.cost = string_cost_exact(cost_fn_, cw.symbols);
  return cw;
}

Word IntervalEncoder::encode_streaming(std::span<const int> x) const {
  for (int s : x) {
    if (s < 0 || s >= source_.alphabet_size()) throw InvalidInput("source symbol out of alphabet range");
  }
  const double logp = source_.log_probability(x);
  if (!std::isfinite(logp)) throw UnencodableInput("source string has zero probability");
  const auto pmf = source_.pmf_exact();
  bool certain = true;
  for (int s : x) certain = certain && pmf[s] == 1;

  const auto channel = channel_for(round_bits(-logp / std::log(2.0)));
  const mpfr_prec_t bits = channel->bits;
  std::vector<BigFloat> p;
  std::vector<BigFloat> below;  // P(symbol < s)
  BigFloat acc(bits);
  for (const auto& q : pmf) {
    below.push_back(acc);
    p.emplace_back(q, bits);
    acc += p.back();
  }
  BigFloat low(bits);
  BigFloat width(1L, bits);
  for (int s : x) {
    low += width * below[s];
    width *= p[s];
  }
  return encode_interval(low, width, certain, *channel);
}

Word IntervalEncoder::decode(std::span<const int> w) const {
  if (codebook_) {
    auto x = codebook_->decode(w);
    if (!x) throw DecodeFailure("not a codeword of this encoder");
    return *x;
  }
  const auto [x, used] = decode_prefix_streaming(w);
  if (used != w.size()) throw DecodeFailure("not a codeword of this encoder");
  return x;
}

std::pair<Word, std::size_t> IntervalEncoder::decode_prefix(std::span<const int> stream) const {
  if (codebook_) {
    auto m = codebook_->match_prefix(stream);
    if (!m) throw DecodeFailure("symbol stream does not start with a codeword");
    return *m;
  }
  return decode_prefix_streaming(stream);
}

std::pair<Word, std::size_t> IntervalEncoder::decode_prefix_streaming(std::span<const int> stream) const {
  const int K = cost_fn_.alphabet_size();
  for (int u : stream) {
    if (u < 0 || u >= K) throw DecodeFailure("code symbol out of range");
  }
  const auto pmf = source_.pmf_exact();
  double max_symbol_bits = 0.0;
  for (const auto& q : pmf) {
    if (sgn(q) > 0) max_symbol_bits = std::max(max_symbol_bits, -std::log2(q.get_d()));
  }
  const auto channel = channel_for(round_bits(max_symbol_bits * n_));
  const mpfr_prec_t bits = channel->bits;

  std::vector<BigFloat> p;
  std::vector<BigFloat> below;
  BigFloat acc(bits);
  for (const auto& q : pmf) {
    below.push_back(acc);
    p.emplace_back(q, bits);
    acc += p.back();
  }

  BigFloat lo(0L, bits);
  BigFloat hi(1L, bits);
  std::size_t ctx = 0;
  for (std::size_t k = 0; k < stream.size(); ++k) {
    const int u = stream[k];
    const BigFloat w = hi - lo;
    BigFloat new_lo = u == 0 ? lo : lo + w * channel->cumulative[ctx][u - 1];
    BigFloat new_hi = u + 1 == K ? hi : lo + w * channel->cumulative[ctx][u];
    lo = std::move(new_lo);
    hi = std::move(new_hi);
    ctx = cost_fn_.advance_context(ctx, k, u);

    // Descend the source tree while one source child holds the channel
    // interval; a complete descent means the codeword ends here.
    BigFloat s_low(bits);
    BigFloat s_width(1L, bits);
    Word x;
    x.reserve(static_cast<std::size_t>(n_));
    for (int depth = 0; depth < n_; ++depth) {
      int found = -1;
      for (int s = 0; s < source_.alphabet_size(); ++s) {
        if (p[s].is_zero()) continue;
        const BigFloat sub_low = s_low + s_width * below[s];
        const BigFloat sub_width = s_width * p[s];
        if (sub_low <= lo && hi <= sub_low + sub_width) {
          found = s;
          s_low = sub_low;
          s_width = sub_width;
          break;
        }
      }
      if (found < 0) break;
      x.push_back(found);
    }
    if (static_cast<int>(x.size()) == n_) {
      const Word expected = encode_streaming(x);
      if (!std::equal(expected.begin(), expected.end(), stream.begin(), stream.begin() + static_cast<long>(k) + 1)) {
        throw DecodeFailure("symbol stream is not a codeword sequence of this encoder");
      }
      return {std::move(x), k + 1};
    }
  }
  throw DecodeFailure("symbol stream ended inside a codeword");
}

// Audits ---------------------------------------------------------------------

double kraft_sum(const Codebook& codebook, const CostFunction& cost_fn, double alpha_c) {
  constexpr mpfr_prec_t bits = 256;
  const BigFloat scale = BigFloat(alpha_c, bits) * log(BigFloat(static_cast<long>(cost_fn.alphabet_size()), bits));
  BigFloat sum(bits);
  codebook.for_each([&](std::uint64_t, const Codeword& cw) { sum += exp(-(scale * BigFloat(cw.cost, bits))); });
  return sum.to_double();
}

double kraft_sum(const IntervalEncoder& enc) { return kraft_sum(enc.codebook(), enc.cost_function(), enc.alpha_c()); }

KraftReport kraft_report(const Codebook& codebook, const CostFunction& cost_fn) {
  constexpr mpfr_prec_t bits = 256;
  const int K = cost_fn.alphabet_size();
  const BigFloat lnK = log(BigFloat(static_cast<long>(K), bits));
  std::vector<std::vector<BigFloat>> q;
  for (const auto& ctx : cost_fn.contexts()) {
    const BigFloat alpha = solve_context_capacity_precise(cost_fn, ctx, bits);
    std::vector<BigFloat> row;
    for (const auto& c : cost_fn.costs_exact_at(cost_fn.context_index(ctx))) {
      row.push_back(exp(-(alpha * BigFloat(c, bits) * lnK)));
    }
    q.push_back(std::move(row));
  }

  KraftReport report;
  report.prefix_free = codebook.is_prefix_free();

  std::set<Word> codewords;
  std::set<Word> internal;
  codebook.for_each([&](std::uint64_t, const Codeword& cw) {
    codewords.insert(cw.symbols);
    for (std::size_t len = 0; len < cw.symbols.size(); ++len) {
      internal.emplace(cw.symbols.begin(), cw.symbols.begin() + static_cast<long>(len));
    }
  });

  auto measure = [&](const Word& w) {
    BigFloat m(1L, bits);
    std::size_t ctx = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m *= q[ctx][w[i]];
      ctx = cost_fn.advance_context(ctx, i, w[i]);
    }
    return m;
  };

  BigFloat leaves(bits);
  for (const auto& w : codewords) leaves += measure(w);
  BigFloat unused(bits);
  for (const auto& node : internal) {
    for (int u = 0; u < K; ++u) {
      Word child = node;
      child.push_back(u);
      if (!internal.count(child) && !codewords.count(child)) unused += measure(child);
    }
  }
  report.sum = leaves.to_double();
  report.unused_mass = unused.to_double();
  report.identity_residual = abs(leaves + unused - BigFloat(1L, bits)).to_double();
  report.certified = report.prefix_free && report.identity_residual < 1e-30 && !(leaves > BigFloat(1L, bits));
  return report;
}

CostBoundReport measure_cost_slack(const Codebook& codebook, const SourceModel& source, const CostFunction& cost_fn,
                                   double alpha_c) {
  const double lnK = std::log(static_cast<double>(cost_fn.alphabet_size()));
  CostBoundReport report;
  report.bound = std::log(2.0) / lnK / alpha_c + cost_fn.c_max();
  report.max_slack = -std::numeric_limits<double>::infinity();
  // Rounding in the double evaluation of log P is far below this margin.
  const double margin = 1e-9 * std::max(1.0, report.bound);
  codebook.for_each([&](std::uint64_t index, const Codeword& cw) {
    const Word x = string_at(index, codebook.source_alphabet(), codebook.block_length());
    const double slack = cw.cost_value() + source.log_probability(x) / lnK / alpha_c;
    if (slack > report.max_slack) {
      report.max_slack = slack;
      report.worst_x = x;
    }
    if (slack > report.bound + margin) ++report.violations;
  });
  report.ok = report.violations == 0;
  return report;
}

CostBoundReport certify_cost_bound(const IntervalEncoder& enc) {
  auto report = measure_cost_slack(enc.codebook(), enc.source(), enc.cost_function(), enc.alpha_c());
  if (!report.ok) {
    throw ConstructionBug("cost bound violated by " + std::to_string(report.violations) +
                          " codewords (max slack " + format_fixed(report.max_slack, 12) + " > bound " +
                          format_fixed(report.bound, 12) + ")");
  }
  return report;
}

// Transformations --------------------------------------------------------------

Codebook permute_codewords(const Codebook& codebook, const CostFunction& cost_fn, std::uint64_t seed) {
  std::vector<std::uint64_t> indices;
  std::vector<Word> words;
  codebook.for_each([&](std::uint64_t i, const Codeword& cw) {
    indices.push_back(i);
    words.push_back(cw.symbols);
  });
  Rng rng(seed);
  for (std::size_t i = words.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(words[i - 1], words[j]);
  }
  Codebook out(codebook.block_length(), codebook.source_alphabet(), cost_fn);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.assign(string_at(indices[i], codebook.source_alphabet(), codebook.block_length()), std::move(words[i]),
               cost_fn);
  }
  return out;
}

Codebook append_symbol(const Codebook& codebook, const CostFunction& cost_fn, int symbol) {
  if (symbol < 0 || symbol >= cost_fn.alphabet_size()) throw InvalidInput("code symbol out of range");
  Codebook out(codebook.block_length(), codebook.source_alphabet(), cost_fn);
  codebook.for_each([&](std::uint64_t i, const Codeword& cw) {
    Word w = cw.symbols;
    w.push_back(symbol);
    out.assign(string_at(i, codebook.source_alphabet(), codebook.block_length()), std::move(w), cost_fn);
  });
  return out;
}

Codebook swap_extremes(const Codebook& codebook, const SourceModel& source, const CostFunction& cost_fn) {
  std::uint64_t best = 0;
  std::uint64_t worst = 0;
  double best_lp = -std::numeric_limits<double>::infinity();
  double worst_lp = std::numeric_limits<double>::infinity();
  codebook.for_each([&](std::uint64_t i, const Codeword&) {
    const double lp = source.log_probability(string_at(i, codebook.source_alphabet(), codebook.block_length()));
    if (lp > best_lp) {
      best_lp = lp;
      best = i;
    }
    if (lp < worst_lp) {
      worst_lp = lp;
      worst = i;
    }
  });
  Codebook out(codebook.block_length(), codebook.source_alphabet(), cost_fn);
  codebook.for_each([&](std::uint64_t i, const Codeword&) {
    std::uint64_t from = i;
    if (i == best) from = worst;
    if (i == worst) from = best;
    out.assign(string_at(i, codebook.source_alphabet(), codebook.block_length()),
               codebook.at_index(from)->symbols, cost_fn);
  });
  return out;
}

void export_codebook(std::ostream& out, const Codebook& codebook) {
  codebook.for_each([&](std::uint64_t i, const Codeword& cw) {
    out << word_to_digits(string_at(i, codebook.source_alphabet(), codebook.block_length())) << ' '
        << word_to_digits(cw.symbols) << ' ' << format_fixed(cw.cost_value(), 12) << '\n';
  });
}

std::vector<std::uint8_t> pack_bits(std::span<const int> symbols) {
  std::vector<std::uint8_t> bytes((symbols.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] != 0 && symbols[i] != 1) throw InvalidInput("packed streams need a binary code alphabet");
    if (symbols[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return bytes;
}

Word unpack_bits(std::span<const std::uint8_t> bytes, std::size_t bit_count) {
  if (bit_count > bytes.size() * 8) throw DecodeFailure("packed stream is shorter than its bit count");
  Word out(bit_count);
  for (std::size_t i = 0; i < bit_count; ++i) out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1;
  return out;
}

}  // namespace ovc
