#pragma once

// Special functions used by the fitting and testing code.
//
// Accuracy (absolute, checked in tests/test_special_functions.cpp against
// Boost.Math):
//   normal_cdf           < 1e-15  (std::erfc based)
//   normal_quantile      < 1e-12 relative  (Wichura AS241, PPND16)
//   log_gamma            < 1e-12 relative for x in (0, 1e6]  (Lanczos g=7, n=9)
//   incomplete_beta      < 1e-12  (modified Lentz continued fraction)
//   student_t_cdf        < 1e-12 for df <= 1e5, < 1e-10 up to df = 1e7

namespace mpsych::special {

double normal_pdf(double x);

// Phi(x), evaluated through erfc so that Phi(x) + Phi(-x) == 1 to rounding.
double normal_cdf(double x);

// Phi^{-1}(p) for p in (0, 1). Throws RangeError outside.
double normal_quantile(double p);

// phi(x) / Phi(x), stable for very negative x where both underflow.
double inverse_mills_ratio(double x);

double log_gamma(double x);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with df degrees of freedom (df may be fractional).
double student_t_cdf(double t, double df);

// Two-sided p-values.
double two_sided_p_normal(double z);
double two_sided_p_student(double t, double df);

}  // namespace mpsych::special
