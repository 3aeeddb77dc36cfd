#include "mpsych/stats.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mpsych/error.hpp"
#include "mpsych/special_functions.hpp"

namespace mpsych::stats {
namespace {

constexpr double kSeparationProbability = 1.0 - 1e-6;
constexpr double kDivergentWeight = 1e6;
constexpr int kMaxHalvings = 60;
// Relative size of rounding noise in a summed log-likelihood.
constexpr double kLogLikNoise = 1e-11;

std::vector<std::string> default_terms(std::vector<std::string> terms, Eigen::Index p) {
  if (terms.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) terms.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(terms.size()) != p) {
    throw InputError("term names do not match design columns");
  }
  return terms;
}

void check_design(const Eigen::MatrixXd& x, std::size_t n_y) {
  if (static_cast<std::size_t>(x.rows()) != n_y) {
    throw InputError("design rows and response length differ");
  }
  if (x.cols() == 0) throw InputError("design has no columns");
  if (x.rows() <= x.cols()) {
    throw InputError("need more observations than design columns");
  }
  if (!x.allFinite()) throw InputError("design contains non-finite values");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) {
    throw RankDeficiencyError("design matrix is rank deficient (rank " +
                              std::to_string(qr.rank()) + " < " +
                              std::to_string(x.cols()) + " columns)");
  }
}

double fitted_probability(double eta, Link link) {
  if (link == Link::probit) return special::normal_cdf(eta);
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

// True when every observation is predicted (almost) with certainty, i.e. the
// likelihood keeps increasing along the current direction.
bool completely_separated(const Eigen::MatrixXd& x, std::span<const double> y,
                          const Eigen::VectorXd& w, Link link) {
  const Eigen::VectorXd eta = x * w;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = fitted_probability(eta(i), link);
    const double p_obs = y[static_cast<std::size_t>(i)] > 0.5 ? p : 1.0 - p;
    if (p_obs < kSeparationProbability) return false;
  }
  return true;
}

}  // namespace

double mean(std::span<const double> v) {
  if (v.empty()) throw EmptyInputError("mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) throw InputError("variance needs at least two values");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw InputError("welch_t: each sample needs at least two values");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = variance(a);
  const double vb = variance(b);
  if (!std::isfinite(va) || !std::isfinite(vb)) {
    throw InputError("welch_t: non-finite sample variance");
  }
  if (va == 0.0 && vb == 0.0) {
    throw DegenerateVarianceError("welch_t: both samples have zero variance");
  }
  const double qa = va / na;
  const double qb = vb / nb;
  const double se = std::sqrt(qa + qb);
  TestResult r;
  r.estimate = mean(a) - mean(b);
  r.statistic = r.estimate / se;
  r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  r.p_value = special::two_sided_p_student(r.statistic, r.df);
  return r;
}

TestResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("pearson: lengths differ");
  if (x.size() < 3) throw InputError("pearson: need at least three pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateVarianceError("pearson: zero variance");
  }
  TestResult res;
  res.df = static_cast<double>(x.size()) - 2.0;
  double r = sxy / std::sqrt(sxx * syy);
  if (std::fabs(r) >= 1.0) {
    r = r > 0 ? 1.0 : -1.0;
    res.statistic = r * std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
  } else {
    res.statistic = r * std::sqrt(res.df / (1.0 - r * r));
    res.p_value = special::two_sided_p_student(res.statistic, res.df);
  }
  res.estimate = r;
  return res;
}

std::vector<CoefficientRow> OlsResult::table() const {
  std::vector<CoefficientRow> rows;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    rows.push_back({terms[j], estimates(k), std_errors(k), t_values(k), p_values(k)});
  }
  return rows;
}

OlsResult ols(const Eigen::MatrixXd& x, std::span<const double> y,
              std::vector<std::string> terms) {
  check_design(x, y.size());
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

  OlsResult res;
  res.terms = default_terms(std::move(terms), p);
  res.n_obs = static_cast<std::size_t>(n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  res.estimates = qr.solve(yv);
  res.residuals = yv - x * res.estimates;
  res.df_residual = static_cast<double>(n - p);
  res.residual_variance = res.residuals.squaredNorm() / res.df_residual;

  const Eigen::MatrixXd xtx_inv =
      (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  res.std_errors = (res.residual_variance * xtx_inv.diagonal().array()).sqrt();
  res.t_values.resize(p);
  res.p_values.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = res.std_errors(j);
    const double est = res.estimates(j);
    if (se > 0.0) {
      res.t_values(j) = est / se;
      res.p_values(j) = special::two_sided_p_student(res.t_values(j), res.df_residual);
    } else if (est != 0.0) {
      res.t_values(j) = std::copysign(std::numeric_limits<double>::infinity(), est);
      res.p_values(j) = 0.0;
    } else {
      res.t_values(j) = 0.0;
      res.p_values(j) = 1.0;
    }
  }
  return res;
}

std::vector<CoefficientRow> GlmFit::table() const {
  std::vector<CoefficientRow> rows;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    rows.push_back({terms[j], estimates(k), std_errors(k), z_values(k), p_values(k)});
  }
  return rows;
}

GlmFit glm_fit(const Eigen::MatrixXd& x, std::span<const double> y, Link link,
               std::vector<std::string> terms, const GlmOptions& options) {
  check_design(x, y.size());
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw InputError("glm_fit: responses must be 0 or 1");
  }
  const Eigen::Index p = x.cols();

  auto moments = [&](const Eigen::VectorXd& w) {
    return options.parallel ? kernels::moments_parallel(x, y, w, link)
                            : kernels::moments_serial(x, y, w, link);
  };
  auto log_likelihood = [&](const Eigen::VectorXd& w) {
    return options.parallel ? kernels::log_likelihood_parallel(x, y, w, link)
                            : kernels::log_likelihood_serial(x, y, w, link);
  };

  GlmFit fit;
  fit.link = link;
  fit.terms = default_terms(std::move(terms), p);
  fit.n_obs = static_cast<std::size_t>(x.rows());

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  GlmMoments m = moments(w);
  fit.log_likelihood_trace.push_back(m.log_likelihood);

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (m.gradient.cwiseAbs().maxCoeff() < options.score_tolerance) {
      fit.converged = true;
      break;
    }
    const Eigen::MatrixXd information = -m.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 0.0) {
      if (completely_separated(x, y, w, link)) {
        throw SeparationError("glm_fit: outcomes are perfectly separated by the design");
      }
      throw RankDeficiencyError("glm_fit: information matrix is singular");
    }
    const Eigen::VectorXd step = ldlt.solve(m.gradient);
    const double decrement = m.gradient.dot(step);
    const double noise = kLogLikNoise * std::max(1.0, std::fabs(m.log_likelihood));

    // Step-halving keeps the log-likelihood non-decreasing. Once the expected
    // gain is below rounding noise the comparison is meaningless and the
    // plain Newton step is taken.
    double scale = 1.0;
    Eigen::VectorXd candidate;
    double candidate_ll = 0.0;
    bool accepted = decrement <= noise;
    if (accepted) candidate = w + step;
    for (int h = 0; h < kMaxHalvings && !accepted; ++h) {
      candidate = w + scale * step;
      candidate_ll = log_likelihood(candidate);
      if (std::isfinite(candidate_ll) && candidate_ll >= m.log_likelihood) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) {
      // No representable improvement left: accept the current point when the
      // Newton decrement says we are at the optimum up to rounding.
      if (decrement < 1e-10 * std::max(1.0, std::fabs(m.log_likelihood))) {
        fit.converged = true;
        break;
      }
      std::ostringstream msg;
      msg << "glm_fit: line search failed at iteration " << iter
          << " (max |score| = " << m.gradient.cwiseAbs().maxCoeff()
          << ", loglik = " << m.log_likelihood << ")";
      throw ConvergenceError(msg.str());
    }
    w = candidate;
    if (w.cwiseAbs().maxCoeff() > kDivergentWeight) {
      throw SeparationError("glm_fit: coefficients diverge (separation)");
    }
    m = moments(w);
    fit.log_likelihood_trace.push_back(m.log_likelihood);
  }
  fit.iterations = iter;

  if (!fit.converged) {
    std::ostringstream msg;
    msg << "glm_fit: no convergence after " << options.max_iterations
        << " iterations (max |score| = " << m.gradient.cwiseAbs().maxCoeff()
        << ", loglik = " << m.log_likelihood << ")";
    if (completely_separated(x, y, w, link)) throw SeparationError(msg.str());
    throw ConvergenceError(msg.str());
  }
  if (completely_separated(x, y, w, link)) {
    throw SeparationError("glm_fit: outcomes are perfectly separated by the design");
  }

  const Eigen::MatrixXd information = -m.hessian;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(information);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw RankDeficiencyError("glm_fit: information matrix is singular at the optimum");
  }
  const Eigen::MatrixXd covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));

  fit.estimates = w;
  fit.log_likelihood = m.log_likelihood;
  fit.std_errors = covariance.diagonal().array().sqrt();
  fit.z_values = fit.estimates.array() / fit.std_errors.array();
  fit.p_values.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    fit.p_values(j) = special::two_sided_p_normal(fit.z_values(j));
  }
  return fit;
}

}  // namespace mpsych::stats
