#pragma once

// Point estimators for the mean matrix: maximum likelihood, James-Stein,
// Efron-Morris, and Bayes estimators driven by the log-marginal gradient.

#include "svshrink/common.hpp"
#include "svshrink/matnorm.hpp"
#include "svshrink/priors.hpp"

#include <optional>
#include <string>

namespace svshrink::estimators {

using priors::PriorKind;
using zonal::SeriesControl;

struct EstimateReport {
  Matrix estimate;
  std::string estimator_id;
  // 1F1 diagnostics, meaningful for the Bayes estimators only.
  std::optional<int> series_terms_used;
};

inline EstimateReport mle(const ModelSpec& spec, const Matrix& x) {
  spec.check_dims(x, "mle: x");
  return {x, "mle", std::nullopt};
}

inline EstimateReport james_stein(const ModelSpec& spec, const Matrix& x,
                                  double scale) {
  spec.check_dims(x, "james_stein: x");
  if (spec.dim() < 3) throw std::invalid_argument("james_stein: requires nm >= 3");
  const double norm2 = x.squaredNorm();
  if (norm2 == 0.0) throw std::domain_error("james_stein: undefined at x = 0");
  const double factor = 1.0 - (spec.dim() - 2.0) * scale / norm2;
  return {factor * x, "js", std::nullopt};
}

// X (I - (n-m-1) scale S^{-1}) with S = X^T X; shrinks each singular value
// by (n-m-1) scale / sigma_i.  No positive-part truncation by default so
// the estimator matches its classical form; the truncated variant is
// available behind the flag.
inline EstimateReport efron_morris(const ModelSpec& spec, const Matrix& x,
                                   double scale, bool positive_part = false) {
  spec.check_dims(x, "efron_morris: x");
  const auto sv = matnorm::svd(x);
  if (sv.sigma(spec.m - 1) <= 0.0 ||
      sv.sigma(spec.m - 1) < 1e-13 * (1.0 + sv.sigma(0))) {
    throw std::domain_error("efron_morris: X^T X is singular");
  }
  Matrix shrunk = Matrix::Zero(spec.n, spec.m);
  for (int i = 0; i < spec.m; ++i) {
    double s = sv.sigma(i) - (spec.n - spec.m - 1.0) * scale / sv.sigma(i);
    if (positive_part && s < 0.0) s = 0.0;
    shrunk += s * sv.u.col(i) * sv.v.col(i).transpose();
  }
  return {shrunk, positive_part ? "em+" : "em", std::nullopt};
}

// Bayes posterior mean via the gradient formula M + scale * grad log m(M).
inline EstimateReport bayes_estimate(const PriorKind& kind, const ModelSpec& spec,
                                     const Matrix& x, double scale,
                                     const SeriesControl& ctrl = {},
                                     double eps = 1e-6) {
  spec.check_dims(x, "bayes_estimate: x");
  const auto g = priors::grad_log_marginal_ex(kind, spec, x, scale, eps, ctrl);
  EstimateReport out;
  out.estimate = x + scale * g.grad;
  out.estimator_id =
      (kind.tag == PriorKind::Tag::Svs) ? "svs-bayes" : "stein-bayes";
  out.series_terms_used = g.max_terms_used;
  return out;
}

inline double frobenius_loss(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw std::invalid_argument("frobenius_loss: dimension mismatch");
  }
  return (estimate - truth).squaredNorm();
}

}  // namespace svshrink::estimators
