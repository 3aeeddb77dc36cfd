#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mpsych/glm_kernels.hpp"

namespace mpsych::stats {

// Outcome of a two-sample test or correlation. `estimate` is the mean
// difference (a - b) for t-tests and r for correlations.
struct TestResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  double estimate = 0.0;
};

// Welch's unequal-variance t-test, two-sided.
TestResult welch_t(std::span<const double> a, std::span<const double> b);

// Pearson correlation; p from t = r sqrt((n-2)/(1-r^2)) on n-2 df.
TestResult pearson(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
// Sample variance (n - 1 denominator).
double variance(std::span<const double> v);

struct CoefficientRow {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double statistic = 0.0;  // z for GLMs, t for OLS
  double p_value = 1.0;
};

struct OlsResult {
  std::vector<std::string> terms;
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd t_values;
  Eigen::VectorXd p_values;
  Eigen::VectorXd residuals;
  double residual_variance = 0.0;
  double df_residual = 0.0;
  std::size_t n_obs = 0;

  std::vector<CoefficientRow> table() const;
};

// Ordinary least squares. Throws RankDeficiencyError for collinear designs
// and InputError when n <= columns. `terms` may be empty (names x0, x1, ...).
OlsResult ols(const Eigen::MatrixXd& x, std::span<const double> y,
              std::vector<std::string> terms = {});

struct GlmOptions {
  int max_iterations = 100;
  // Converged when max |score| falls below this.
  double score_tolerance = 1e-8;
  bool parallel = true;
};

struct GlmFit {
  Link link = Link::probit;
  std::vector<std::string> terms;
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd z_values;
  Eigen::VectorXd p_values;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  std::size_t n_obs = 0;
  // Log-likelihood after every accepted Newton step, starting at w = 0.
  std::vector<double> log_likelihood_trace;

  std::vector<CoefficientRow> table() const;
};

// Maximum-likelihood binary GLM by Newton-Raphson from zero with
// step-halving. Wald standard errors from the inverse observed information.
//
// Errors: InputError (shape, non-binary y, n <= columns), RankDeficiencyError,
// SeparationError (perfectly predicted outcomes / diverging weights),
// ConvergenceError.
GlmFit glm_fit(const Eigen::MatrixXd& x, std::span<const double> y, Link link,
               std::vector<std::string> terms = {}, const GlmOptions& options = {});

}  // namespace mpsych::stats
