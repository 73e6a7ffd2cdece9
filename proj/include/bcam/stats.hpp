#pragma once

// Small descriptive-statistics helpers used by starting values, diagnostics,
// the simulator and the test oracles.

#include <span>
#include <vector>

namespace bcam {

double mean(std::span<const double> x);
double variance(std::span<const double> x);  // n - 1 denominator

/// Sample quantile, linear interpolation between order statistics (type 7).
double quantile(std::span<const double> x, double p);

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
double kendall_tau(std::span<const double> x, std::span<const double> y);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against N(0, 1).
KsResult ks_test_std_normal(std::span<const double> x);

/// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
double kolmogorov_p_value(double statistic, double n_effective);

}  // namespace bcam
