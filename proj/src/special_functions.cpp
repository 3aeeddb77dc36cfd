#include "mpsych/special_functions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "mpsych/error.hpp"

namespace mpsych::special {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double polynomial(const std::array<double, 8>& c, double r) {
  double acc = c[7];
  for (int i = 6; i >= 0; --i) acc = acc * r + c[static_cast<std::size_t>(i)];
  return acc;
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 20000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw ConvergenceError("incomplete beta continued fraction did not converge");
}

}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw RangeError("normal_quantile: p must lie in (0, 1)");
  }
  static constexpr std::array<double, 8> a = {
      3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
      1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr std::array<double, 8> b = {
      1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2, 5.3941960214247511077e+3,
      2.1213794301586595867e+4, 3.9307895800092710610e+4, 2.8729085735721942674e+4,
      5.2264952788528545610e+3};
  static constexpr std::array<double, 8> c = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr std::array<double, 8> d = {
      1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9};
  static constexpr std::array<double, 8> e = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr std::array<double, 8> f = {
      1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * polynomial(a, r) / polynomial(b, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = polynomial(c, r) / polynomial(d, r);
  } else {
    r -= 5.0;
    value = polynomial(e, r) / polynomial(f, r);
  }
  return q < 0.0 ? -value : value;
}

double inverse_mills_ratio(double x) {
  if (x > -37.0) {
    return normal_pdf(x) / normal_cdf(x);
  }
  // Asymptotic expansion of Phi(x) for x -> -inf; the first omitted term is
  // below 1e-14 relative at x = -37.
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
  return -x / series;
}

double log_gamma(double x) {
  if (!(x > 0.0)) {
    if (x == std::floor(x)) return std::numeric_limits<double>::infinity();
  }
  if (x < 0.5) {
    return std::log(std::numbers::pi / std::fabs(std::sin(std::numbers::pi * x))) -
           log_gamma(1.0 - x);
  }
  static constexpr std::array<double, 9> kLanczos = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double g = 7.0;
  x -= 1.0;
  double acc = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) {
    acc += kLanczos[i] / (x + static_cast<double>(i));
  }
  const double t = x + g + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (x + 0.5) * std::log(t) - t + std::log(acc);
}

namespace {

double stirling_tail(double z) {
  const double r = 1.0 / (z * z);
  return (1.0 / 12.0 -
          r * (1.0 / 360.0 -
               r * (1.0 / 1260.0 -
                    r * (1.0 / 1680.0 -
                         r * (1.0 / 1188.0 - r * (691.0 / 360360.0 - r / 156.0)))))) /
         z;
}

// log B(a, b). With a large argument, lgamma(big) - lgamma(small + big) is
// evaluated as one expression instead of a difference of two large numbers.
double log_beta(double a, double b) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  if (hi < 10.0) return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
  const double ratio = -(hi - 0.5) * std::log1p(lo / hi) - lo * std::log(hi + lo) + lo +
                       stirling_tail(hi) - stirling_tail(hi + lo);
  return log_gamma(lo) + ratio;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw RangeError("incomplete_beta: a, b must be positive");
  if (x < 0.0 || x > 1.0) throw RangeError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = -log_beta(a, b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double two_sided_p_student(double t, double df) {
  if (!(df > 0.0)) throw RangeError("student t: df must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  if (t2 < df) {
    // df / (df + t^2) is close to 1 here; use the complementary argument.
    return 1.0 - incomplete_beta(0.5, 0.5 * df, t2 / (df + t2));
  }
  return incomplete_beta(0.5 * df, 0.5, df / (df + t2));
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * two_sided_p_student(t, df);
  return t >= 0.0 ? 1.0 - tail : tail;
}

double two_sided_p_normal(double z) { return std::erfc(std::fabs(z) * kInvSqrt2); }

}  // namespace mpsych::special
