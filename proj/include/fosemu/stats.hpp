#pragma once

#include <span>
#include <vector>

namespace fosemu::stats {

double log_normal_pdf(double x, double mean, double sd);
/// Inverse gamma, shape-scale: density proportional to x^(-shape-1) exp(-scale / x).
double log_inverse_gamma_pdf(double x, double shape, double scale);
double log_exponential_pdf(double x, double rate);

double normal_cdf(double z);
double normal_pdf(double z);
double normal_quantile(double p);

/// Linear-interpolation sample quantile (R type 7). `values` need not be sorted.
double quantile(std::span<const double> values, double p);
/// Same, for already sorted input.
double quantile_sorted(std::span<const double> sorted, double p);

double mean(std::span<const double> values);
/// Sample variance with n - 1 denominator.
double variance(std::span<const double> values);

}  // namespace fosemu::stats
