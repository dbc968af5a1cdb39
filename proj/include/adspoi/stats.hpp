#pragma once

#include <span>

namespace adspoi {

double mean_of(std::span<const double> v);
double sample_std(std::span<const double> v);  // n-1 denominator

// Regularized incomplete beta I_x(a, b), Lentz continued fraction.
double reg_inc_beta(double a, double b, double x);

// Two-sided p-value of a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, int df);

struct OriginFit {
  double slope = 0.0;
  double r2 = 0.0;
};

// Least-squares line through the origin; r2 = 1 - SS_res/SS_tot.
OriginFit fit_through_origin(std::span<const double> x,
                             std::span<const double> y);

}  // namespace adspoi
