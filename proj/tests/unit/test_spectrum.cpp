#include <catch_amalgamated.hpp>

#include <mpfr.h>

#include <cmath>

#include "ovcost/cost_model.hpp"
#include "ovcost/errors.hpp"
#include "ovcost/spectrum.hpp"

using Catch::Approx;
using namespace ovc;

namespace {

Rational R(const char* s) { return parse_decimal(s); }

// Phi(t) by composite Simpson integration of the density from 0 to |t|.
double cdf_oracle(double t) {
  const int steps = 20000;
  const long double h = std::fabs(t) / steps;
  auto f = [](long double u) { return std::exp(-0.5L * u * u); };
  long double s = f(0) + f(std::fabs(t));
  for (int i = 1; i < steps; ++i) s += (i % 2 ? 4.0L : 2.0L) * f(i * h);
  const long double half_mass = s * h / 3.0L / std::sqrt(2.0L * 3.14159265358979323846264338327950288L);
  return static_cast<double>(t >= 0 ? 0.5L + half_mass : 0.5L - half_mass);
}

// Phi^-1(p) by bisection on a 256-bit erfc.
double quantile_oracle(double p) {
  mpfr_t lo, hi, mid, v, target;
  mpfr_inits2(256, lo, hi, mid, v, target, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_d(lo, -40.0, MPFR_RNDN);
  mpfr_set_d(hi, 40.0, MPFR_RNDN);
  mpfr_set_d(target, p, MPFR_RNDN);
  for (int i = 0; i < 200; ++i) {
    mpfr_add(mid, lo, hi, MPFR_RNDN);
    mpfr_div_2ui(mid, mid, 1, MPFR_RNDN);
    // Phi(mid) = erfc(-mid / sqrt 2) / 2
    mpfr_sqrt_ui(v, 2, MPFR_RNDN);
    mpfr_div(v, mid, v, MPFR_RNDN);
    mpfr_neg(v, v, MPFR_RNDN);
    mpfr_erfc(v, v, MPFR_RNDN);
    mpfr_div_2ui(v, v, 1, MPFR_RNDN);
    if (mpfr_less_p(v, target)) {
      mpfr_set(lo, mid, MPFR_RNDN);
    } else {
      mpfr_set(hi, mid, MPFR_RNDN);
    }
  }
  const double out = mpfr_get_d(lo, MPFR_RNDN);
  mpfr_clears(lo, hi, mid, v, target, static_cast<mpfr_ptr>(nullptr));
  return out;
}

// Pr{Binomial(n, p) = k} by the log-gamma formula.
double binom_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                  (n - k) * std::log1p(-p));
}

const double kH25 = 0.8112781244591328;  // H(Bern(0.25)) in bits
const double kH40 = 0.9709505944546686;
const double kH10 = 0.4689955935892812;

SourceModel two_bern_mixture() {
  return SourceModel::mixture({{R("0.3"), SourceModel::bernoulli(R("0.1"))},
                               {R("0.7"), SourceModel::bernoulli(R("0.4"))}});
}

}  // namespace

TEST_CASE("gaussian_cdf", "[spectrum]") {
  CHECK(gaussian_cdf(0.0) == 0.5);
  for (double t = -8.0; t <= 8.0; t += 0.37) {
    CHECK(std::fabs(gaussian_cdf(t) - cdf_oracle(t)) <= 1e-10);
    CHECK(std::fabs(gaussian_cdf(-t) - (1.0 - gaussian_cdf(t))) <= 1e-12);
  }
}

TEST_CASE("gaussian_quantile", "[spectrum]") {
  CHECK(gaussian_quantile(0.5) == 0.0);
  CHECK(std::fabs(gaussian_quantile(0.975) - 1.959964) <= 1e-6);
  CHECK(std::fabs(gaussian_quantile(0.975) - quantile_oracle(0.975)) <= 1e-8);
  for (double p : {1e-6, 1e-4, 0.01, 0.02425, 0.1, 0.3, 0.7, 0.9, 0.97575, 0.999, 1 - 1e-6}) {
    CHECK(std::fabs(gaussian_quantile(p) - quantile_oracle(p)) <= 1e-8);
  }
  for (int e = -6; e <= -1; ++e) {
    for (double m = 1.0; m < 10.0; m += 1.5) {
      const double p = m * std::pow(10.0, e);
      if (p >= 0.5) continue;
      CHECK(std::fabs(gaussian_cdf(gaussian_quantile(p)) - p) <= 1e-8);
      CHECK(std::fabs(gaussian_cdf(gaussian_quantile(1 - p)) - (1 - p)) <= 1e-8);
    }
  }
  CHECK_THROWS_AS(gaussian_quantile(0.0), DomainError);
  CHECK_THROWS_AS(gaussian_quantile(1.0), DomainError);
}

TEST_CASE("first-order curves", "[spectrum]") {
  SECTION("fair coin has a single atom at rate one") {
    const auto grid = make_grid(0.5, 1.5, 0.125);
    for (auto method : {SpectrumMethod::Exact, SpectrumMethod::Binomial, SpectrumMethod::MonteCarlo}) {
      SpectrumOptions opt;
      opt.method = method;
      opt.trials = 2000;
      const auto c = spectrum_first_order(SourceModel::bernoulli(R("0.5")), 1.0, 2, 12, grid, opt);
      for (std::size_t i = 0; i < grid.size(); ++i) CHECK(c.values[i] == (grid[i] <= 1.0 ? 1.0 : 0.0));
    }
  }
  SECTION("Bern(0.25), n = 16 against a binomial tail") {
    const int n = 16;
    const auto grid = make_grid(0.0, 2.1, 0.01);
    SpectrumOptions exact;
    exact.method = SpectrumMethod::Exact;
    const auto c = spectrum_first_order(SourceModel::bernoulli(R("0.25")), 1.0, 2, n, grid, exact);
    SpectrumOptions bin;
    bin.method = SpectrumMethod::Binomial;
    const auto b = spectrum_first_order(SourceModel::bernoulli(R("0.25")), 1.0, 2, n, grid, bin);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      // Self-information rate with k ones: (k log2 4 + (n-k) log2(4/3)) / n.
      double oracle = 0.0;
      for (int k = 0; k <= n; ++k) {
        const double rate = (k * 2.0 + (n - k) * std::log2(4.0 / 3.0)) / n;
        if (rate >= grid[i] - 1e-12) oracle += binom_pmf(n, k, 0.25);
      }
      CHECK(c.values[i] == Approx(oracle).margin(1e-12));
      CHECK(b.values[i] == Approx(oracle).margin(1e-12));
    }
  }
  SECTION("invariants: bounded, non-increasing, deterministic") {
    const auto grid = make_grid(0.0, 2.0, 0.05);
    SpectrumOptions mc;
    mc.method = SpectrumMethod::MonteCarlo;
    mc.trials = 3000;
    mc.seed = 17;
    const auto markov = SourceModel::markov({R("0.5"), R("0.5")}, {{R("0.9"), R("0.1")}, {R("0.2"), R("0.8")}});
    for (const auto& src : {markov, two_bern_mixture()}) {
      const auto c = spectrum_first_order(src, 1.0, 2, 64, grid, mc);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(c.values[i] >= 0.0);
        CHECK(c.values[i] <= 1.0);
        if (i > 0) CHECK(c.values[i] <= c.values[i - 1]);
      }
      CHECK(spectrum_first_order(src, 1.0, 2, 64, grid, mc).values == c.values);
    }
    CHECK_THROWS_AS(spectrum_first_order(markov, 1.0, 2, 8, {0.5, 0.2}), InvalidInput);
  }
  SECTION("base change: K and K^2 with the capacity halved") {
    const auto grid = make_grid(0.2, 1.8, 0.1);
    const auto src = two_bern_mixture();
    const double alpha = solve_cost_capacity(CostFunction::memoryless({R("1"), R("2")})).alpha_c;
    const auto c2 = spectrum_first_order(src, alpha, 2, 40, grid);
    const auto c4 = spectrum_first_order(src, alpha / 2, 4, 40, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(c2.values[i] == Approx(c4.values[i]).margin(1e-12));
  }
}

TEST_CASE("mixture plateau", "[spectrum]") {
  SpectrumOptions mc;
  mc.method = SpectrumMethod::MonteCarlo;
  mc.trials = 100000;
  mc.seed = 3;
  const auto c = spectrum_first_order(two_bern_mixture(), 1.0, 2, 2048, {0.72}, mc);
  CHECK(std::fabs(c.values[0] - 0.7) <= 0.03);
  const auto b = spectrum_first_order(two_bern_mixture(), 1.0, 2, 2048, {0.72});
  CHECK(b.method == SpectrumMethod::Binomial);
  CHECK(std::fabs(b.values[0] - 0.7) <= 1e-6);
}

TEST_CASE("second-order curves", "[spectrum]") {
  const auto src = SourceModel::bernoulli(R("0.25"));
  const double sigma = std::sqrt(0.25 * 0.75) * std::log2(3.0);
  const auto c = spectrum_second_order(src, 1.0, 2, kH25, 10000, {-1e6, 0.0, sigma * quantile_oracle(0.9), 1e6});
  CHECK(c.values[0] == 1.0);
  CHECK(std::fabs(c.values[1] - 0.5) <= 0.02);
  CHECK(std::fabs(c.values[2] - 0.1) <= 0.02);
  CHECK(c.values[3] == 0.0);

  // At L = threshold_second_order_iid(eps) the tail returns eps.
  const std::vector<double> pmf = {0.75, 0.25};
  for (double eps : {0.1, 0.25, 0.5, 0.8}) {
    const double L = threshold_second_order_iid(pmf, 1.0, 2, eps);
    CHECK(std::fabs(spectrum_second_order(src, 1.0, 2, kH25, 10000, {L}).values[0] - eps) <= 0.02);
  }
}

TEST_CASE("threshold_second_order_iid", "[spectrum]") {
  const std::vector<double> pmf = {0.75, 0.25};
  const double sigma = std::sqrt(0.25 * 0.75) * std::log2(3.0);
  CHECK(threshold_second_order_iid(pmf, 1.0, 2, 0.5) == 0.0);
  CHECK(threshold_second_order_iid(pmf, 1.0, 2, 0.1) == Approx(sigma * quantile_oracle(0.9)).epsilon(1e-10));
  const double alpha = solve_cost_capacity(CostFunction::memoryless({R("1"), R("2")})).alpha_c;
  CHECK(threshold_second_order_iid(pmf, alpha, 2, 0.1) == Approx(sigma * quantile_oracle(0.9) / alpha).epsilon(1e-10));
  const std::vector<double> flat = {0.5, 0.5};
  CHECK_THROWS_AS(threshold_second_order_iid(flat, 1.0, 2, 0.1), DegenerateSource);
  CHECK_THROWS_AS(threshold_second_order_iid(pmf, 1.0, 2, 0.0), DomainError);
  CHECK_THROWS_AS(threshold_second_order_iid(pmf, 1.0, 2, 1.0), DomainError);
}

TEST_CASE("first-order thresholds", "[spectrum]") {
  const auto grid = make_grid(0.0, 2.5, 0.01);
  SECTION("i.i.d. brackets contain H / alpha") {
    const auto src = SourceModel::bernoulli(R("0.25"));
    const auto est = threshold_first_order(src, 1.0, 2, 0.5, {256, 1024, 4096}, grid);
    CHECK(est.lower <= kH25);
    CHECK(kH25 <= est.upper);
    CHECK(est.n == 4096);
    CHECK(est.curves.size() == 3);
    REQUIRE(est.analytic);
    CHECK(*est.analytic == Approx(kH25).epsilon(1e-12));

    const double alpha = solve_cost_capacity(CostFunction::memoryless({R("1"), R("2")})).alpha_c;
    const auto est2 = threshold_first_order(src, alpha, 2, 0.5, {4096}, grid);
    CHECK(est2.lower <= kH25 / alpha);
    CHECK(kH25 / alpha <= est2.upper);
    CHECK(kH25 / alpha == Approx(1.168582).margin(1e-6));
  }
  SECTION("mixture steps at the weight of the high-entropy component") {
    const auto mix = two_bern_mixture();
    for (double eps : {0.1, 0.5, 0.69}) {
      const auto est = threshold_first_order(mix, 1.0, 2, eps, {2048}, grid);
      CHECK(std::fabs(est.value - kH40) <= 0.02);
      CHECK(*est.analytic == Approx(kH40).epsilon(1e-12));
    }
    // Just past the step the finite-n crossing still sits a few sigma/sqrt(n)
    // above the low entropy, but well below the plateau.
    CHECK(threshold_first_order(mix, 1.0, 2, 0.71, {2048}, grid).value < 0.6);
    for (double eps : {0.8, 0.9}) {
      const auto est = threshold_first_order(mix, 1.0, 2, eps, {2048}, grid);
      CHECK(std::fabs(est.value - kH10) <= 0.02);
      CHECK(*est.analytic == Approx(kH10).epsilon(1e-12));
    }
    CHECK(*analytic_first_order_threshold(mix, 1.0, 2, 0.7) == Approx(kH10).epsilon(1e-12));
  }
  SECTION("bracket errors") {
    CHECK_THROWS_AS(threshold_first_order(SourceModel::bernoulli(R("0.25")), 1.0, 2, 0.5, {64}, make_grid(1.5, 2.5, 0.1)),
                    BracketNotFound);
    CHECK_THROWS_AS(threshold_first_order(SourceModel::bernoulli(R("0.25")), 1.0, 2, 1.0, {64}, grid), DomainError);
  }
  SECTION("small epsilon agrees with the sup-entropy estimate") {
    for (const auto& src : {SourceModel::bernoulli(R("0.25")), two_bern_mixture()}) {
      const auto est = threshold_first_order(src, 1.0, 2, 0.01, {4096}, grid);
      const auto sup = sup_entropy_rate_estimate(src, 2, {4096}, 0.01);
      CHECK(sup.value >= est.lower - 1e-12);
      CHECK(sup.value <= est.upper + 1e-12);
    }
  }
}

TEST_CASE("second-order threshold from curves", "[spectrum]") {
  const auto src = SourceModel::bernoulli(R("0.25"));
  const auto est = threshold_second_order(src, 1.0, 2, kH25, 0.1, {10000}, make_grid(-3.0, 3.0, 0.01));
  REQUIRE(est.analytic);
  CHECK(std::fabs(est.value - *est.analytic) <= 0.03);
}

TEST_CASE("sup_entropy_rate_estimate", "[spectrum]") {
  const auto iid = sup_entropy_rate_estimate(SourceModel::bernoulli(R("0.25")), 2, power_of_two_schedule(6, 14), 0.01);
  CHECK(iid.n == 16384);
  CHECK(std::fabs(iid.value - 0.8113) <= 0.02);
  CHECK(*iid.analytic == Approx(kH25).epsilon(1e-12));
  const auto mix = sup_entropy_rate_estimate(two_bern_mixture(), 2, {16384}, 0.01);
  CHECK(std::fabs(mix.value - kH40) <= 0.02);
  CHECK(*mix.analytic == Approx(kH40).epsilon(1e-12));
  const auto degenerate = sup_entropy_rate_estimate(SourceModel::bernoulli(R("1")), 2, {64}, 0.01);
  CHECK(degenerate.value == 0.0);
  const auto markov = SourceModel::markov({R("0.5"), R("0.5")}, {{R("0.9"), R("0.1")}, {R("0.2"), R("0.8")}});
  CHECK_FALSE(analytic_sup_entropy_rate(markov, 2).has_value());
}

TEST_CASE("grid helpers", "[spectrum]") {
  const auto g = make_grid(0.0, 1.0, 0.1);
  CHECK(g.size() == 11);
  // Points are the nearest doubles to the decimal grid values.
  CHECK(g[3] == 0.3);
  CHECK(make_grid(0.0, 2.0, 0.01)[140] == 1.4);
  CHECK(make_grid(-5.0, 5.0, 0.01).size() == 1001);
  CHECK(power_of_two_schedule(6, 8) == std::vector<int>{64, 128, 256});
  CHECK_THROWS_AS(make_grid(1.0, 0.0, 0.1), InvalidInput);
}
