#include "ovcost/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "ovcost/errors.hpp"

namespace ovc {

// Gaussian ------------------------------------------------------------------------

double gaussian_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

namespace {

// Lower-half quantile, p in (0, 0.5].
double lower_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // One Halley step against the erfc-based CDF.
  const double e = gaussian_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace

double gaussian_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("gaussian_quantile needs 0 < p < 1");
  if (p == 0.5) return 0.0;
  // 1 - p is exact for p >= 0.5, and the lower tail keeps full relative accuracy.
  return p < 0.5 ? lower_quantile(p) : -lower_quantile(1.0 - p);
}

// Spectrum curves ------------------------------------------------------------------

std::string method_name(SpectrumMethod m) {
  switch (m) {
    case SpectrumMethod::Auto:
      return "auto";
    case SpectrumMethod::Exact:
      return "exact";
    case SpectrumMethod::Binomial:
      return "binomial";
    case SpectrumMethod::MonteCarlo:
      return "mc";
  }
  return "";
}

namespace {

// Atoms of the self-information distribution: (iota, mass), ascending iota.
struct Atoms {
  std::vector<std::pair<double, double>> points;
  SpectrumMethod method = SpectrumMethod::Exact;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
};

SpectrumMethod resolve(const SourceModel& src, int n, const SpectrumOptions& opt) {
  if (opt.method != SpectrumMethod::Auto) return opt.method;
  if (has_count_spectrum(src)) return SpectrumMethod::Binomial;
  if (count_strings(src.alphabet_size(), n) <= opt.budget) return SpectrumMethod::Exact;
  return SpectrumMethod::MonteCarlo;
}

Atoms self_info_atoms(const SourceModel& src, int K, int n, const SpectrumOptions& opt) {
  if (n < 1) throw InvalidInput("block length must be positive");
  if (K < 2) throw InvalidInput("code alphabet size must be at least 2");
  Atoms at;
  at.method = resolve(src, n, opt);
  switch (at.method) {
    case SpectrumMethod::Binomial: {
      const CountSpectrum cs = count_spectrum(src, n, K);
      for (int k = 0; k <= n; ++k) {
        if (cs.mass[k] > 0.0) at.points.emplace_back(cs.self_info[k], cs.mass[k]);
      }
      break;
    }
    case SpectrumMethod::Exact:
      src.enumerate(
          n,
          [&](std::span<const int> x, double p) {
            if (p > 0.0) at.points.emplace_back(src.self_information(x, K), p);
          },
          opt.budget);
      break;
    case SpectrumMethod::MonteCarlo: {
      if (opt.trials == 0) throw InvalidInput("trials must be at least 1");
      at.trials = opt.trials;
      at.seed = opt.seed;
      Rng rng(opt.seed);
      Word x;
      const double w = 1.0 / static_cast<double>(opt.trials);
      at.points.reserve(opt.trials);
      for (std::uint64_t t = 0; t < opt.trials; ++t) {
        src.sample_into(rng, n, x);
        at.points.emplace_back(src.self_information(x, K), w);
      }
      break;
    }
    case SpectrumMethod::Auto:
      break;
  }
  std::sort(at.points.begin(), at.points.end());
  return at;
}

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidInput("grid is empty");
  for (double g : grid) {
    if (!std::isfinite(g)) throw InvalidInput("grid values must be finite");
  }
  if (!std::is_sorted(grid.begin(), grid.end())) throw InvalidInput("grid must be sorted ascending");
}

// Pr{stat >= g} for each grid point, stat = (iota - shift) / scale.
std::vector<double> tail_values(const Atoms& at, double shift, double scale, const std::vector<double>& grid) {
  const std::size_t m = at.points.size();
  std::vector<long double> tail(m + 1, 0.0L);
  std::vector<std::uint64_t> count_tail(m + 1, 0);
  for (std::size_t i = m; i-- > 0;) {
    tail[i] = tail[i + 1] + at.points[i].second;
    count_tail[i] = count_tail[i + 1] + 1;
  }
  std::vector<double> out;
  out.reserve(grid.size());
  for (double g : grid) {
    const double cut = g - 1e-12 * std::max(1.0, std::fabs(g));
    const auto it = std::partition_point(at.points.begin(), at.points.end(), [&](const auto& p) {
      return (p.first - shift) / scale < cut;
    });
    const std::size_t idx = static_cast<std::size_t>(it - at.points.begin());
    double v;
    if (at.method == SpectrumMethod::MonteCarlo) {
      v = static_cast<double>(count_tail[idx]) / static_cast<double>(at.trials);
    } else {
      v = static_cast<double>(tail[idx]);
    }
    out.push_back(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

void check_alpha(double alpha_c) {
  if (!(alpha_c > 0.0) || !std::isfinite(alpha_c)) throw InvalidInput("alpha_c must be positive");
}

SpectrumCurve make_curve(const Atoms& at, int n, int K, double alpha_c, const std::vector<double>& grid) {
  SpectrumCurve c;
  c.n = n;
  c.K = K;
  c.alpha_c = alpha_c;
  c.grid = grid;
  c.method = at.method;
  c.trials = at.trials;
  c.seed = at.seed;
  return c;
}

}  // namespace

SpectrumCurve spectrum_first_order(const SourceModel& src, double alpha_c, int K, int n,
                                   const std::vector<double>& grid, const SpectrumOptions& opt) {
  check_alpha(alpha_c);
  check_grid(grid);
  const Atoms at = self_info_atoms(src, K, n, opt);
  SpectrumCurve c = make_curve(at, n, K, alpha_c, grid);
  c.kind = SpectrumKind::FirstOrder;
  c.values = tail_values(at, 0.0, n * alpha_c, grid);
  return c;
}

SpectrumCurve spectrum_second_order(const SourceModel& src, double alpha_c, int K, double a, int n,
                                    const std::vector<double>& grid, const SpectrumOptions& opt) {
  check_alpha(alpha_c);
  check_grid(grid);
  if (!std::isfinite(a)) throw InvalidInput("a must be finite");
  const Atoms at = self_info_atoms(src, K, n, opt);
  SpectrumCurve c = make_curve(at, n, K, alpha_c, grid);
  c.kind = SpectrumKind::SecondOrder;
  c.a = a;
  c.values = tail_values(at, n * alpha_c * a, std::sqrt(static_cast<double>(n)) * alpha_c, grid);
  return c;
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw InvalidInput("grid needs finite lo <= hi and a positive step");
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
  if (count > 10000000) throw InvalidInput("grid is too fine");
  std::vector<double> g(count);
  // Index-based points, snapped to 12 significant digits so that 0.01-steps
  // print as 1.4 rather than 1.4000000000000001.
  char buf[32];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof buf, "%.12g", lo + static_cast<double>(i) * step);
    g[i] = std::strtod(buf, nullptr);
  }
  return g;
}

std::vector<int> power_of_two_schedule(int lo_exp, int hi_exp) {
  if (lo_exp < 0 || hi_exp < lo_exp || hi_exp > 30) throw InvalidInput("invalid power-of-two schedule");
  std::vector<int> s;
  for (int e = lo_exp; e <= hi_exp; ++e) s.push_back(1 << e);
  return s;
}

// Thresholds ---------------------------------------------------------------------

Bracket crossing_bracket(const SpectrumCurve& curve, double epsilon) {
  const auto& v = curve.values;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] <= epsilon) {
      if (j == 0) throw BracketNotFound("curve is already at or below epsilon at the first grid point");
      return Bracket{curve.grid[j - 1], curve.grid[j]};
    }
  }
  throw BracketNotFound("curve does not drop to epsilon within the grid");
}

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in [0, 1)");
}

std::vector<int> sorted_schedule(const std::vector<int>& n_schedule) {
  if (n_schedule.empty()) throw InvalidInput("block-length schedule is empty");
  std::vector<int> s = n_schedule;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  if (s.front() < 1) throw InvalidInput("block lengths must be positive");
  return s;
}

// Leaves of a mixture tree of i.i.d. components: (weight, entropy in base K).
bool iid_leaves(const SourceModel& src, int K, double weight, std::vector<std::pair<double, double>>& out) {
  switch (src.kind()) {
    case SourceModel::Kind::Iid:
      out.emplace_back(weight, self_info_stats(src.pmf(), K).entropy);
      return true;
    case SourceModel::Kind::Markov:
      return false;
    case SourceModel::Kind::Mixture:
      for (const auto& c : src.components()) {
        const double w = weight * c.weight.get_d();
        if (w > 0.0 && !iid_leaves(*c.model, K, w, out)) return false;
      }
      return true;
  }
  return false;
}

ThresholdEstimate fill_threshold(std::vector<SpectrumCurve> curves, double epsilon, const std::vector<int>& sched) {
  ThresholdEstimate est;
  est.epsilon = epsilon;
  est.n_schedule = sched;
  est.n = sched.back();
  const Bracket b = crossing_bracket(curves.back(), epsilon);
  est.lower = b.lower;
  est.upper = b.upper;
  est.value = 0.5 * (b.lower + b.upper);
  est.curves = std::move(curves);
  return est;
}

}  // namespace

std::optional<double> analytic_first_order_threshold(const SourceModel& src, double alpha_c, int K, double epsilon) {
  check_epsilon(epsilon);
  std::vector<std::pair<double, double>> leaves;
  if (!iid_leaves(src, K, 1.0, leaves)) return std::nullopt;
  // Merge equal entropies, then walk from the largest entropy down: the
  // threshold is the smallest entropy whose strictly-higher mass is <= epsilon.
  std::sort(leaves.begin(), leaves.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  double above = 0.0;
  double result = leaves.front().second;
  for (std::size_t i = 0; i < leaves.size();) {
    std::size_t j = i;
    double mass = 0.0;
    while (j < leaves.size() && std::fabs(leaves[j].second - leaves[i].second) <= 1e-12) mass += leaves[j++].first;
    if (above <= epsilon + 1e-12) result = leaves[i].second;
    above += mass;
    i = j;
  }
  return result / alpha_c;
}

std::optional<double> analytic_sup_entropy_rate(const SourceModel& src, int K) {
  std::vector<std::pair<double, double>> leaves;
  if (!iid_leaves(src, K, 1.0, leaves)) return std::nullopt;
  double h = 0.0;
  for (const auto& [w, e] : leaves) h = std::max(h, e);
  return h;
}

ThresholdEstimate threshold_first_order(const SourceModel& src, double alpha_c, int K, double epsilon,
                                        const std::vector<int>& n_schedule, const std::vector<double>& grid,
                                        const SpectrumOptions& opt) {
  check_epsilon(epsilon);
  const auto sched = sorted_schedule(n_schedule);
  std::vector<SpectrumCurve> curves;
  for (int n : sched) curves.push_back(spectrum_first_order(src, alpha_c, K, n, grid, opt));
  ThresholdEstimate est = fill_threshold(std::move(curves), epsilon, sched);
  est.kind = SpectrumKind::FirstOrder;
  est.analytic = analytic_first_order_threshold(src, alpha_c, K, epsilon);
  return est;
}

ThresholdEstimate threshold_second_order(const SourceModel& src, double alpha_c, int K, double a, double epsilon,
                                         const std::vector<int>& n_schedule, const std::vector<double>& grid,
                                         const SpectrumOptions& opt) {
  check_epsilon(epsilon);
  const auto sched = sorted_schedule(n_schedule);
  std::vector<SpectrumCurve> curves;
  for (int n : sched) curves.push_back(spectrum_second_order(src, alpha_c, K, a, n, grid, opt));
  ThresholdEstimate est = fill_threshold(std::move(curves), epsilon, sched);
  est.kind = SpectrumKind::SecondOrder;
  est.a = a;
  if (src.kind() == SourceModel::Kind::Iid && epsilon > 0.0) {
    const double h = self_info_stats(src.pmf(), K).entropy;
    const double sigma2 = self_info_stats(src.pmf(), K).sigma2;
    if (std::fabs(a - h / alpha_c) <= 1e-9 * std::max(1.0, std::fabs(a)) && sigma2 > 0.0) {
      est.analytic = threshold_second_order_iid(src.pmf(), alpha_c, K, epsilon);
    }
  }
  return est;
}

double threshold_second_order_iid(std::span<const double> pmf, double alpha_c, int K, double epsilon) {
  check_alpha(alpha_c);
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
  const double sigma2 = self_info_stats(pmf, K).sigma2;
  if (!(sigma2 > 1e-15)) {
    throw DegenerateSource("self-information variance is zero; the second-order threshold is undefined");
  }
  return std::sqrt(sigma2) * gaussian_quantile(1.0 - epsilon) / alpha_c;
}

SupEntropyEstimate sup_entropy_rate_estimate(const SourceModel& src, int K, const std::vector<int>& n_schedule,
                                             double delta, const SpectrumOptions& opt) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  const auto sched = sorted_schedule(n_schedule);
  const int n = sched.back();
  const Atoms at = self_info_atoms(src, K, n, opt);
  SupEntropyEstimate est;
  est.n = n;
  est.delta = delta;
  est.method = at.method;
  est.analytic = analytic_sup_entropy_rate(src, K);
  const double target = 1.0 - delta - 1e-12;
  long double cum = 0.0L;
  est.value = at.points.empty() ? 0.0 : at.points.back().first / n;
  for (const auto& [iota, w] : at.points) {
    cum += w;
    if (cum >= target) {
      est.value = iota / n;
      break;
    }
  }
  if (est.value == 0.0) est.value = 0.0;  // normalize -0
  return est;
}

void write_spectrum_rows(std::ostream& out, const std::vector<SpectrumCurve>& curves) {
  out << kSpectrumCsvHeader << '\n';
  for (const auto& c : curves) {
    const bool mc = c.method == SpectrumMethod::MonteCarlo;
    const std::string kind = c.kind == SpectrumKind::FirstOrder ? "first" : "second";
    const std::string a = c.kind == SpectrumKind::SecondOrder ? format_real(c.a) : "";
    const std::string trials = mc ? std::to_string(c.trials) : "";
    const std::string seed = mc ? std::to_string(c.seed) : "";
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      out << c.n << ',' << kind << ',' << a << ',' << format_real(c.grid[i]) << ',' << format_real(c.values[i]) << ','
          << method_name(c.method) << ',' << trials << ',' << seed << '\n';
    }
  }
}

}  // namespace ovc
