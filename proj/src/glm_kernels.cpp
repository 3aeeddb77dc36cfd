#include "mpsych/glm_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mpsych/special_functions.hpp"

namespace mpsych::stats::kernels {
namespace {

struct Terms {
  double log_likelihood;
  double score;      // d loglik / d eta
  double curvature;  // d^2 loglik / d eta^2
};

double clip(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

Terms probit_terms(double eta, double y) {
  const double q = y > 0.5 ? 1.0 : -1.0;
  const double lambda = q * special::inverse_mills_ratio(q * eta);
  return {std::log(clip(special::normal_cdf(q * eta))), lambda, -lambda * (lambda + eta)};
}

Terms logit_terms(double eta, double y) {
  const double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                              : std::exp(eta) / (1.0 + std::exp(eta));
  const double pc = clip(p);
  const double ll = y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
  return {ll, y - p, -p * (1.0 - p)};
}

Terms terms(double eta, double y, Link link) {
  return link == Link::probit ? probit_terms(eta, y) : logit_terms(eta, y);
}

double term_log_likelihood(double eta, double y, Link link) {
  if (link == Link::probit) {
    const double q = y > 0.5 ? 1.0 : -1.0;
    return std::log(clip(special::normal_cdf(q * eta)));
  }
  return logit_terms(eta, y).log_likelihood;
}

GlmMoments block_moments(const Eigen::MatrixXd& x, std::span<const double> y,
                         const Eigen::VectorXd& w, Link link, Eigen::Index begin,
                         Eigen::Index rows) {
  const auto xb = x.middleRows(begin, rows);
  const Eigen::VectorXd eta = xb * w;
  Eigen::VectorXd score(rows);
  Eigen::VectorXd curvature(rows);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Terms t = terms(eta(i), y[static_cast<std::size_t>(begin + i)], link);
    ll += t.log_likelihood;
    score(i) = t.score;
    curvature(i) = t.curvature;
  }
  GlmMoments m;
  m.log_likelihood = ll;
  m.gradient = xb.transpose() * score;
  m.hessian = xb.transpose() * curvature.asDiagonal() * xb;
  return m;
}

Eigen::Index block_count(Eigen::Index n) { return (n + kBlockRows - 1) / kBlockRows; }

}  // namespace

GlmMoments moments_serial(const Eigen::MatrixXd& x, std::span<const double> y,
                          const Eigen::VectorXd& w, Link link) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  GlmMoments m;
  m.gradient = Eigen::VectorXd::Zero(p);
  m.hessian = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) eta += x(i, j) * w(j);
    const Terms t = terms(eta, y[static_cast<std::size_t>(i)], link);
    m.log_likelihood += t.log_likelihood;
    for (Eigen::Index j = 0; j < p; ++j) {
      m.gradient(j) += t.score * x(i, j);
      for (Eigen::Index k = 0; k < p; ++k) {
        m.hessian(j, k) += t.curvature * x(i, j) * x(i, k);
      }
    }
  }
  return m;
}

double log_likelihood_serial(const Eigen::MatrixXd& x, std::span<const double> y,
                             const Eigen::VectorXd& w, Link link) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double eta = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) eta += x(i, j) * w(j);
    ll += term_log_likelihood(eta, y[static_cast<std::size_t>(i)], link);
  }
  return ll;
}

GlmMoments moments_parallel(const Eigen::MatrixXd& x, std::span<const double> y,
                            const Eigen::VectorXd& w, Link link) {
  const Eigen::Index n = x.rows();
  const Eigen::Index nb = block_count(n);
  std::vector<GlmMoments> partial(static_cast<std::size_t>(nb));

#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    const Eigen::Index begin = b * kBlockRows;
    const Eigen::Index rows = std::min(kBlockRows, n - begin);
    partial[static_cast<std::size_t>(b)] = block_moments(x, y, w, link, begin, rows);
  }

  GlmMoments m;
  m.gradient = Eigen::VectorXd::Zero(x.cols());
  m.hessian = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (const auto& part : partial) {
    m.log_likelihood += part.log_likelihood;
    m.gradient += part.gradient;
    m.hessian += part.hessian;
  }
  return m;
}

double log_likelihood_parallel(const Eigen::MatrixXd& x, std::span<const double> y,
                               const Eigen::VectorXd& w, Link link) {
  const Eigen::Index n = x.rows();
  const Eigen::Index nb = block_count(n);
  std::vector<double> partial(static_cast<std::size_t>(nb), 0.0);

#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    const Eigen::Index begin = b * kBlockRows;
    const Eigen::Index rows = std::min(kBlockRows, n - begin);
    const Eigen::VectorXd eta = x.middleRows(begin, rows) * w;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      ll += term_log_likelihood(eta(i), y[static_cast<std::size_t>(begin + i)], link);
    }
    partial[static_cast<std::size_t>(b)] = ll;
  }

  double ll = 0.0;
  for (double v : partial) ll += v;
  return ll;
}

}  // namespace mpsych::stats::kernels
