#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>

#include "ovcost/errors.hpp"
#include "ovcost/sources.hpp"

using Catch::Approx;
using namespace ovc;

namespace {

Rational R(const char* s) { return parse_decimal(s); }

SourceModel two_bern_mixture() {
  return SourceModel::mixture({{R("0.3"), SourceModel::bernoulli(R("0.1"))},
                               {R("0.7"), SourceModel::bernoulli(R("0.4"))}});
}

SourceModel sticky_markov() {
  return SourceModel::markov({R("0.5"), R("0.5")}, {{R("0.9"), R("0.1")}, {R("0.2"), R("0.8")}});
}

SourceModel ternary_iid() { return SourceModel::iid({R("0.5"), R("0.3"), R("0.2")}); }

// Upper quantile of chi-square with df degrees of freedom at tail 1e-3, via
// the Wilson-Hilferty approximation (z = 3.0902).
double chi2_critical_1e3(int df) {
  const double z = 3.090232306167813;
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

}  // namespace

TEST_CASE("probability examples", "[sources]") {
  CHECK(SourceModel::bernoulli(R("0.25")).probability_exact(Word{1, 1, 0}) == Rational(3, 64));
  CHECK(SourceModel::bernoulli(R("0.25")).probability(Word{1, 1, 0}) == Approx(0.046875).epsilon(1e-14));
  CHECK(two_bern_mixture().probability_exact(Word{1}) == R("0.31"));
  const auto alternating = SourceModel::markov({R("1"), R("0")}, {{R("0"), R("1")}, {R("1"), R("0")}});
  CHECK(alternating.probability_exact(Word{0, 1, 0}) == 1);
  CHECK(alternating.probability(Word{0, 1, 0}) == 1.0);
  CHECK(alternating.probability_exact(Word{0, 0, 0}) == 0);
}

TEST_CASE("model validation", "[sources]") {
  CHECK_THROWS_AS(SourceModel::iid({R("0.5"), R("0.6")}), InvalidInput);
  CHECK_THROWS_AS(SourceModel::iid({R("1.5"), R("-0.5")}), InvalidInput);
  CHECK_THROWS_AS(SourceModel::markov({R("1")}, {{R("0.5"), R("0.5")}}), InvalidInput);
  CHECK_THROWS_AS(SourceModel::mixture({{R("0.5"), SourceModel::bernoulli(R("0.5"))},
                                        {R("0.5"), ternary_iid()}}),
                  InvalidInput);
  CHECK_THROWS_AS(SourceModel::bernoulli(R("0.5")).probability(Word{0, 2}), InvalidInput);
}

TEST_CASE("enumerate examples", "[sources]") {
  SECTION("fair coin, n = 2") {
    int count = 0;
    SourceModel::bernoulli(R("0.5")).enumerate(2, [&](std::span<const int>, double p) {
      CHECK(p == 0.25);
      ++count;
    });
    CHECK(count == 4);
  }
  SECTION("Bern(0.25), n = 1") {
    std::map<Word, Rational> seen;
    SourceModel::bernoulli(R("0.25")).enumerate_exact(1, [&](std::span<const int> x, const Rational& p) {
      seen[Word(x.begin(), x.end())] = p;
    });
    CHECK(seen.at(Word{0}) == Rational(3, 4));
    CHECK(seen.at(Word{1}) == Rational(1, 4));
  }
  SECTION("degenerate mixture puts all mass on constant strings") {
    const auto m = SourceModel::mixture({{R("0.5"), SourceModel::bernoulli(R("0"))},
                                         {R("0.5"), SourceModel::bernoulli(R("1"))}});
    m.enumerate_exact(3, [&](std::span<const int> x, const Rational& p) {
      const Word w(x.begin(), x.end());
      if (w == Word{0, 0, 0} || w == Word{1, 1, 1}) {
        CHECK(p == Rational(1, 2));
      } else {
        CHECK(p == 0);
      }
    });
  }
  SECTION("budget") {
    CHECK_THROWS_AS(SourceModel::bernoulli(R("0.5")).enumerate(30, [](std::span<const int>, double) {}),
                    EnumerationTooLarge);
    CHECK_THROWS_AS(ternary_iid().enumerate(5, [](std::span<const int>, double) {}, 100), EnumerationTooLarge);
  }
}

TEST_CASE("enumerated probabilities sum to one", "[sources][property]") {
  const std::vector<SourceModel> models = {SourceModel::bernoulli(R("0.25")), two_bern_mixture(), sticky_markov(),
                                           ternary_iid(),
                                           SourceModel::mixture({{R("0.6"), sticky_markov()},
                                                                 {R("0.4"), SourceModel::bernoulli(R("0.9"))}})};
  for (const auto& m : models) {
    for (int n = 1; n <= 9; ++n) {
      double total = 0.0;
      m.enumerate(n, [&](std::span<const int>, double p) { total += p; });
      CHECK(std::fabs(total - 1.0) <= 1e-9);
    }
    Rational exact_total = 0;
    m.enumerate_exact(6, [&](std::span<const int>, const Rational& p) { exact_total += p; });
    CHECK(exact_total == 1);
  }
}

TEST_CASE("sampling", "[sources]") {
  SECTION("deterministic given the seed") {
    for (const auto& m : {two_bern_mixture(), sticky_markov(), ternary_iid()}) {
      CHECK(m.sample(50, 1234) == m.sample(50, 1234));
    }
    CHECK(two_bern_mixture().sample(64, 1) != two_bern_mixture().sample(64, 2));
  }
  SECTION("degenerate Bern(1)") {
    for (std::uint64_t seed : {0ull, 7ull, 99ull}) CHECK(SourceModel::bernoulli(R("1")).sample(4, seed) == Word{1, 1, 1, 1});
  }
  SECTION("Bern(0.25) sample mean") {
    const Word x = SourceModel::bernoulli(R("0.25")).sample(100000, 42);
    double mean = 0.0;
    for (int s : x) mean += s;
    mean /= static_cast<double>(x.size());
    CHECK(std::fabs(mean - 0.25) <= 0.01);
  }
}

TEST_CASE("empirical block distribution matches enumeration (chi-square, 1e-3)", "[sources][property]") {
  const std::vector<SourceModel> models = {two_bern_mixture(), sticky_markov(), ternary_iid()};
  for (const auto& m : models) {
    for (int n : {1, 2, 4}) {
      const int trials = 100000;
      std::map<Word, int> counts;
      Rng rng(777 + static_cast<std::uint64_t>(n));
      Word x;
      for (int t = 0; t < trials; ++t) {
        m.sample_into(rng, n, x);
        ++counts[x];
      }
      double chi2 = 0.0;
      int cells = 0;
      m.enumerate(n, [&](std::span<const int> s, double p) {
        if (p <= 0.0) {
          CHECK(counts.count(Word(s.begin(), s.end())) == 0);
          return;
        }
        const double expected = p * trials;
        const auto it = counts.find(Word(s.begin(), s.end()));
        const double observed = it == counts.end() ? 0.0 : it->second;
        chi2 += (observed - expected) * (observed - expected) / expected;
        ++cells;
      });
      if (cells > 1) CHECK(chi2 < chi2_critical_1e3(cells - 1));
    }
  }
}

TEST_CASE("self_info_stats", "[sources]") {
  SECTION("uniform binary") {
    const std::vector<double> pmf = {0.5, 0.5};
    const auto st = self_info_stats(pmf, 2);
    CHECK(st.entropy == Approx(1.0).epsilon(1e-15));
    CHECK(st.sigma2 == Approx(0.0).margin(1e-15));
  }
  SECTION("Bern(0.25) against the binary closed form") {
    const std::vector<double> pmf = {0.75, 0.25};
    const auto st = self_info_stats(pmf, 2);
    const double log2_3 = std::log2(3.0);
    CHECK(st.entropy == Approx(0.811278).margin(1e-6));
    CHECK(st.sigma2 == Approx(0.25 * 0.75 * log2_3 * log2_3).epsilon(1e-13));
    CHECK(st.sigma2 == Approx(0.471020).margin(1e-6));
    const auto st4 = self_info_stats(pmf, 4);
    CHECK(st4.entropy == Approx(st.entropy / 2).epsilon(1e-13));
    CHECK(st4.sigma2 == Approx(st.sigma2 / 4).epsilon(1e-13));
  }
  SECTION("sigma2 vanishes only for uniform-on-support pmfs") {
    const std::vector<double> flat = {0.0, 0.25, 0.25, 0.25, 0.25};
    CHECK(self_info_stats(flat, 2).sigma2 == Approx(0.0).margin(1e-14));
    const std::vector<double> skew = {0.5, 0.25, 0.25};
    CHECK(self_info_stats(skew, 2).sigma2 > 0.1);
  }
}

TEST_CASE("normalized self-information concentrates at H for i.i.d. sources", "[sources][property]") {
  const auto src = SourceModel::bernoulli(R("0.25"));
  const std::vector<double> pmf = {0.75, 0.25};
  const auto st = self_info_stats(pmf, 2);
  const int n = 10000;
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) mean += src.self_information(src.sample(n, seed), 2) / n;
  mean /= 100.0;
  CHECK(std::fabs(mean - st.entropy) <= 4.0 * std::sqrt(st.sigma2 / n));
}

TEST_CASE("mixture self-information splits between component entropies", "[sources][property]") {
  const auto src = two_bern_mixture();
  const double h_low = self_info_stats(std::vector<double>{0.9, 0.1}, 2).entropy;
  const double h_high = self_info_stats(std::vector<double>{0.6, 0.4}, 2).entropy;
  const int n = 2048;
  const int trials = 4000;
  int near_high = 0;
  int near_low = 0;
  for (int t = 0; t < trials; ++t) {
    const double rate = src.self_information(src.sample(n, 5000 + static_cast<std::uint64_t>(t)), 2) / n;
    if (std::fabs(rate - h_high) < 0.05) ++near_high;
    if (std::fabs(rate - h_low) < 0.08) ++near_low;
  }
  CHECK(near_high + near_low == trials);
  CHECK(static_cast<double>(near_high) / trials == Approx(0.7).margin(0.03));
}

TEST_CASE("lexicographic indexing round-trips", "[sources]") {
  for (std::uint64_t i = 0; i < 81; ++i) CHECK(lexicographic_index(string_at(i, 3, 4), 3) == i);
  CHECK(string_at(5, 2, 3) == Word{1, 0, 1});
}
