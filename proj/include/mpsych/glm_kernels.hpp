#pragma once

#include <Eigen/Dense>
#include <span>

namespace mpsych::stats {

enum class Link { probit, logit };

// Log-likelihood of a binary GLM together with its gradient and Hessian
// with respect to the coefficients.
struct GlmMoments {
  double log_likelihood = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Fitted probabilities are clipped to [kProbabilityFloor, 1 - kProbabilityFloor]
// before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

namespace kernels {

// Rows per reduction block. The parallel kernels always sum block partials
// in block order, so their result does not depend on the thread count.
inline constexpr Eigen::Index kBlockRows = 1024;

// Serial reference: one row at a time, natural summation order.
GlmMoments moments_serial(const Eigen::MatrixXd& x, std::span<const double> y,
                          const Eigen::VectorXd& w, Link link);
double log_likelihood_serial(const Eigen::MatrixXd& x, std::span<const double> y,
                             const Eigen::VectorXd& w, Link link);

// OpenMP kernels over fixed row blocks.
GlmMoments moments_parallel(const Eigen::MatrixXd& x, std::span<const double> y,
                            const Eigen::VectorXd& w, Link link);
double log_likelihood_parallel(const Eigen::MatrixXd& x, std::span<const double> y,
                               const Eigen::VectorXd& w, Link link);

}  // namespace kernels
}  // namespace mpsych::stats
