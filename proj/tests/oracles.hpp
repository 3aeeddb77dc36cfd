#pragma once

// Reference computations used to check the library. Nothing here calls into
// mpsych; each oracle takes a different numerical route to the same answer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

// Posterior of theta ~ N(m0, v0) after one observation r ~ N(theta, noise_var),
// by trapezoid integration of prior x likelihood on a dense grid.
inline Moments grid_bayes(double m0, double v0, double r, double noise_var, int n = 40001) {
  const double sd = std::sqrt(std::max(v0, noise_var));
  const double lo = std::min(m0, r) - 14.0 * sd;
  const double hi = std::max(m0, r) + 14.0 * sd;
  const double h = (hi - lo) / (n - 1);
  std::vector<double> logw(n);
  double peak = -INFINITY;
  for (int i = 0; i < n; ++i) {
    const double t = lo + h * i;
    logw[i] = -0.5 * (t - m0) * (t - m0) / v0 - 0.5 * (r - t) * (r - t) / noise_var;
    peak = std::max(peak, logw[i]);
  }
  double z = 0.0, s1 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(logw[i] - peak) * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
    logw[i] = w;
    z += w;
    s1 += w * (lo + h * i);
  }
  const double mean = s1 / z;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = lo + h * i - mean;
    s2 += logw[i] * d * d;
  }
  return {mean, s2 / z};
}

// Phi(x) = 1/2 + integral_0^x phi(t) dt by composite Simpson.
inline double normal_cdf_by_quadrature(double x, int intervals = 4000) {
  const auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); };
  const double h = x / intervals;
  double s = pdf(0.0) + pdf(x);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(h * i);
  return 0.5 + s * h / 3.0;
}

// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(a[i][k]) > std::fabs(a[piv][k])) piv = i;
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  return x;
}

// Least squares through the normal equations X'X b = X'y, solved by elimination.
inline std::vector<double> ols_by_elimination(const std::vector<std::vector<double>>& rows,
                                              const std::vector<double>& y) {
  const std::size_t p = rows.front().size();
  std::vector<std::vector<double>> xtx(p, std::vector<double>(p, 0.0));
  std::vector<double> xty(p, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t a = 0; a < p; ++a) {
      xty[a] += rows[i][a] * y[i];
      for (std::size_t b = 0; b < p; ++b) xtx[a][b] += rows[i][a] * rows[i][b];
    }
  }
  return gauss_solve(xtx, xty);
}

inline double pearson_by_covariance(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Quantile of |r| for n independent pairs, by simulation.
inline double null_abs_r_quantile(int n, double q, int reps = 20000, std::uint64_t seed = 7) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rs;
  rs.reserve(reps);
  std::vector<double> x(n), y(n);
  for (int k = 0; k < reps; ++k) {
    for (int i = 0; i < n; ++i) {
      x[i] = u(eng);
      y[i] = u(eng);
    }
    rs.push_back(std::fabs(pearson_by_covariance(x, y)));
  }
  std::sort(rs.begin(), rs.end());
  return rs[static_cast<std::size_t>(q * (reps - 1))];
}

inline double probit_loglik(const std::vector<std::vector<double>>& rows,
                            const std::vector<double>& y, const std::vector<double>& w) {
  double ll = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) eta += rows[i][j] * w[j];
    const double p = std::clamp(0.5 * std::erfc(-eta / std::sqrt(2.0)), 1e-12, 1.0 - 1e-12);
    ll += y[i] > 0.5 ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

// Coarse-to-fine grid search for the probit MLE: a full grid over the box,
// then repeated zooms around the best point.
inline std::vector<double> probit_grid_mle(const std::vector<std::vector<double>>& rows,
                                           const std::vector<double>& y, std::vector<double> lo,
                                           std::vector<double> hi, int points = 11,
                                           int zooms = 8) {
  const std::size_t p = lo.size();
  std::vector<double> best(p);
  for (int z = 0; z <= zooms; ++z) {
    double best_ll = -INFINITY;
    std::vector<int> idx(p, 0);
    while (true) {
      std::vector<double> w(p);
      for (std::size_t j = 0; j < p; ++j) w[j] = lo[j] + (hi[j] - lo[j]) * idx[j] / (points - 1);
      const double ll = probit_loglik(rows, y, w);
      if (ll > best_ll) {
        best_ll = ll;
        best = w;
      }
      std::size_t j = 0;
      while (j < p && ++idx[j] == points) idx[j++] = 0;
      if (j == p) break;
    }
    for (std::size_t j = 0; j < p; ++j) {
      const double half = (hi[j] - lo[j]) / (points - 1);
      lo[j] = best[j] - half;
      hi[j] = best[j] + half;
    }
  }
  return best;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::size_t count_lines(const std::filesystem::path& p) {
  const auto text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace oracle
