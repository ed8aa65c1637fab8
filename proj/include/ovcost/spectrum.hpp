#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ovcost/sources.hpp"

namespace ovc {

// Standard normal CDF, via erfc.
double gaussian_cdf(double t);
// Inverse of gaussian_cdf on (0, 1): rational approximation plus one Halley
// step. Throws DomainError outside (0, 1).
double gaussian_quantile(double p);

enum class SpectrumKind { FirstOrder, SecondOrder };

enum class SpectrumMethod {
  Auto,      // binomial when available, else exact within budget, else mc
  Exact,     // enumeration of X^n
  Binomial,  // count representation of binary i.i.d. sources and mixtures
  MonteCarlo,
};

struct SpectrumOptions {
  SpectrumMethod method = SpectrumMethod::Auto;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  std::uint64_t budget = kDefaultEnumerationBudget;
};

std::string method_name(SpectrumMethod m);

// Finite-n information-spectrum tail on a sorted grid:
//   first order:  Pr{ iota / (n alpha) >= R }
//   second order: Pr{ (iota - n alpha a) / (sqrt(n) alpha) >= L }
// with iota = -log_K P(X^n). The ">=" uses a 1e-12 relative allowance so that
// atoms sitting exactly on a grid point are counted.
struct SpectrumCurve {
  int n = 0;
  SpectrumKind kind = SpectrumKind::FirstOrder;
  double a = 0.0;
  int K = 2;
  double alpha_c = 1.0;
  std::vector<double> grid;
  std::vector<double> values;
  SpectrumMethod method = SpectrumMethod::Exact;  // resolved, never Auto
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
};

SpectrumCurve spectrum_first_order(const SourceModel& src, double alpha_c, int K, int n,
                                   const std::vector<double>& grid, const SpectrumOptions& opt = {});
SpectrumCurve spectrum_second_order(const SourceModel& src, double alpha_c, int K, double a, int n,
                                    const std::vector<double>& grid, const SpectrumOptions& opt = {});

// Evenly spaced grid lo, lo + step, ..., up to hi (inclusive within step/2).
std::vector<double> make_grid(double lo, double hi, double step);
// Geometric block-length schedule 2^lo_exp, ..., 2^hi_exp.
std::vector<int> power_of_two_schedule(int lo_exp, int hi_exp);

struct ThresholdEstimate {
  double epsilon = 0.0;
  SpectrumKind kind = SpectrumKind::FirstOrder;
  double a = 0.0;
  // Crossing of the curve at the largest n: curve(lower) > epsilon >= curve(upper).
  double lower = 0.0;
  double upper = 0.0;
  double value = 0.0;  // bracket midpoint (half-step offset)
  int n = 0;
  std::vector<int> n_schedule;
  std::optional<double> analytic;
  // One curve per scheduled n, ascending.
  std::vector<SpectrumCurve> curves;
};

struct Bracket {
  double lower = 0.0;
  double upper = 0.0;
};
// Throws BracketNotFound when the curve never drops to epsilon inside the
// grid, or is already at or below epsilon at the first grid point.
Bracket crossing_bracket(const SpectrumCurve& curve, double epsilon);

// inf{R : F(R) <= epsilon} from the first-order curves; the analytic value is
// attached for i.i.d. sources (H/alpha) and finite mixtures of i.i.d. sources
// (the step function of component entropies and weights).
ThresholdEstimate threshold_first_order(const SourceModel& src, double alpha_c, int K, double epsilon,
                                        const std::vector<int>& n_schedule, const std::vector<double>& grid,
                                        const SpectrumOptions& opt = {});
// Same on the second-order curves around rate a; analytic value for i.i.d.
// sources when a = H/alpha.
ThresholdEstimate threshold_second_order(const SourceModel& src, double alpha_c, int K, double a, double epsilon,
                                         const std::vector<int>& n_schedule, const std::vector<double>& grid,
                                         const SpectrumOptions& opt = {});

// (1/alpha) sqrt(sigma^2) Phi^-1(1 - epsilon). Throws DomainError for epsilon
// outside (0, 1) and DegenerateSource when sigma^2 = 0.
double threshold_second_order_iid(std::span<const double> pmf, double alpha_c, int K, double epsilon);

// Limiting first-order threshold of an i.i.d. source or a finite mixture of
// i.i.d. sources; nullopt for other sources.
std::optional<double> analytic_first_order_threshold(const SourceModel& src, double alpha_c, int K, double epsilon);
// Spectral sup-entropy rate: H for i.i.d., the largest component entropy
// among components with positive weight for mixtures.
std::optional<double> analytic_sup_entropy_rate(const SourceModel& src, int K);

struct SupEntropyEstimate {
  double value = 0.0;  // (1 - delta)-quantile of iota / n at the largest n
  int n = 0;
  double delta = 0.0;
  std::optional<double> analytic;
  SpectrumMethod method = SpectrumMethod::Exact;
};

SupEntropyEstimate sup_entropy_rate_estimate(const SourceModel& src, int K, const std::vector<int>& n_schedule,
                                             double delta, const SpectrumOptions& opt = {});

inline constexpr const char* kSpectrumCsvHeader = "n,kind,a,abscissa,value,method,trials,seed";
void write_spectrum_rows(std::ostream& out, const std::vector<SpectrumCurve>& curves);

}  // namespace ovc
