#pragma once

// Bayesian predictive densities for a future observation and the
// Kullback-Leibler loss sampler used by the risk experiments.
//
// The uniform-prior predictive is Gaussian.  The shrinkage-prior
// predictives use the sufficiency factorization
//   p(Yf | Y) = [p(Y, Yf | M) / p(Z | M)] * m(Z; v0) / m(Y; v1),
// with Z = v0 (Y/v1 + Yf/v2) ~ N(M, v0 I, I) the sufficient statistic and
// the leading Gaussian ratio free of M.  For v1 = v2 = 1 this reduces to
// the closed form evaluated by log_pred_svs_direct, which the tests check
// against the factorized route.

#include "svshrink/common.hpp"
#include "svshrink/matnorm.hpp"
#include "svshrink/priors.hpp"

#include <cmath>

namespace svshrink::predictive {

using zonal::SeriesControl;

struct PredictiveQuery {
  ModelSpec spec;
  Matrix y;
  Matrix y_future;

  PredictiveQuery(const ModelSpec& s, Matrix y_, Matrix yf) : spec(s), y(std::move(y_)), y_future(std::move(yf)) {
    spec.check_dims(y, "PredictiveQuery: y");
    spec.check_dims(y_future, "PredictiveQuery: y_future");
  }

  Matrix sufficient_statistic() const {
    return spec.v0() * (y / spec.v1 + y_future / spec.v2);
  }
};

// Uniform prior: the predictive is N_{n,m}(Y, (v1+v2) I_n, I_m).
inline double log_pred_uniform(const PredictiveQuery& q) {
  return matnorm::log_density(q.spec, q.y_future, q.y, q.spec.v1 + q.spec.v2);
}

namespace detail {

// log of the M-free Gaussian ratio p(Y, Yf | M) / p(Z | M).
inline double log_gaussian_ratio(const PredictiveQuery& q) {
  const double v1 = q.spec.v1, v2 = q.spec.v2, v0 = q.spec.v0();
  const double d = static_cast<double>(q.spec.dim());
  const Matrix z = q.sufficient_statistic();
  const double quad = q.y.squaredNorm() / v1 + q.y_future.squaredNorm() / v2 -
                      z.squaredNorm() / v0;
  return -0.5 * d * (std::log(2.0 * M_PI * v1) + std::log(2.0 * M_PI * v2) -
                     std::log(2.0 * M_PI * v0)) -
         0.5 * quad;
}

}  // namespace detail

inline double log_pred_svs(const PredictiveQuery& q, const SeriesControl& ctrl = {}) {
  const Matrix z = q.sufficient_statistic();
  return detail::log_gaussian_ratio(q) +
         priors::log_marginal_svs(q.spec, z, q.spec.v0(), ctrl) -
         priors::log_marginal_svs(q.spec, q.y, q.spec.v1, ctrl);
}

inline double log_pred_stein(const PredictiveQuery& q, const SeriesControl& ctrl = {}) {
  const Matrix z = q.sufficient_statistic();
  return detail::log_gaussian_ratio(q) +
         priors::log_marginal_stein(q.spec, z, q.spec.v0(), ctrl) -
         priors::log_marginal_stein(q.spec, q.y, q.spec.v1, ctrl);
}

// Closed-form density for v1 = v2 = 1 with Z = Y + Yf:
//   (2 pi)^{-nm/2} 2^{-m(m+1)/2}
//     etr{ -1/4 (Yf-Y)'(Yf-Y) - 1/4 Z'Z + 1/2 Y'Y }
//     1F1((m+1)/2; n/2; 1/4 Z'Z) / 1F1((m+1)/2; n/2; 1/2 Y'Y).
inline double log_pred_svs_direct(const PredictiveQuery& q,
                                  const SeriesControl& ctrl = {}) {
  if (q.spec.v1 != 1.0 || q.spec.v2 != 1.0) {
    throw std::invalid_argument("log_pred_svs_direct: requires v1 = v2 = 1");
  }
  const int n = q.spec.n, m = q.spec.m;
  const double a = 0.5 * (m + 1), b = 0.5 * n;
  const Matrix z = q.y + q.y_future;
  const auto num = zonal::hyp1f1_matrix(a, b, priors::detail::scaled_gram_eigenvalues(z, 4.0), ctrl);
  const auto den = zonal::hyp1f1_matrix(a, b, priors::detail::scaled_gram_eigenvalues(q.y, 2.0), ctrl);
  if (!num.converged || !den.converged) {
    throw ConvergenceError("log_pred_svs_direct: 1F1 series did not converge",
                           std::max(num.terms_used, den.terms_used));
  }
  const double d = static_cast<double>(q.spec.dim());
  return -0.5 * d * std::log(2.0 * M_PI) - 0.5 * m * (m + 1.0) * std::log(2.0) -
         0.25 * (q.y_future - q.y).squaredNorm() - 0.25 * z.squaredNorm() +
         0.5 * q.y.squaredNorm() + num.log_value - den.log_value;
}

enum class PredictiveId { Uniform, Svs, Stein };

inline const char* predictive_label(PredictiveId id) {
  switch (id) {
    case PredictiveId::Uniform: return "uniform";
    case PredictiveId::Svs: return "svs";
    case PredictiveId::Stein: return "stein";
  }
  return "?";
}

// One joint draw (Y, Yf) at the true mean and the realized KL loss
// log p(Yf | M) - log phat(Yf | Y); its expectation is the KL risk.
inline double kl_loss_sample(const ModelSpec& spec, const Matrix& truth,
                             PredictiveId predictive, const SeriesControl& ctrl,
                             RngStream& rng) {
  spec.check_dims(truth, "kl_loss_sample: truth");
  const Matrix y = matnorm::sample(spec, truth, spec.v1, rng);
  const Matrix yf = matnorm::sample(spec, truth, spec.v2, rng);
  const double log_true = matnorm::log_density(spec, yf, truth, spec.v2);
  const PredictiveQuery q(spec, y, yf);
  double log_hat = 0.0;
  switch (predictive) {
    case PredictiveId::Uniform: log_hat = log_pred_uniform(q); break;
    case PredictiveId::Svs: log_hat = log_pred_svs(q, ctrl); break;
    case PredictiveId::Stein: log_hat = log_pred_stein(q, ctrl); break;
  }
  return log_true - log_hat;
}

}  // namespace svshrink::predictive
