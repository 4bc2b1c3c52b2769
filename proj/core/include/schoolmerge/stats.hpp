#pragma once

#include <cstddef>
#include <vector>

namespace schoolmerge {

double norm_cdf(double x);
// Inverse standard normal CDF (Wichura's AS241, double precision).
double norm_ppf(double p);

double mean_of(const std::vector<double>& v);
double variance_of(const std::vector<double>& v);  // population (divides by n)
double median_of(std::vector<double> v);
// Linear-interpolation quantile on a copy (R type 7). p in [0,1].
double quantile_of(std::vector<double> v, double p);

// Two-sided p-value of a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// Regularized incomplete beta I_x(a,b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

struct OlsFit {
  double slope = 0;
  double intercept = 0;
  double stderr_slope = 0;
  double t_stat = 0;
  double p_value = 1;
  std::size_t n = 0;
};

// Simple y = a + b x least squares with the classical t test on b.
// Degenerate x (zero variance) or n < 3 gives slope 0, p 1.
OlsFit ols_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace schoolmerge
