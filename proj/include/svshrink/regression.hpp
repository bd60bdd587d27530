#pragma once

// Multivariate linear regression reduction to the matrix-variate Normal
// model, and the covariance-dependent transform A* whose composed
// shrinkage prior keeps the prediction dominance guarantee when the
// observation and future covariances differ.

#include "svshrink/common.hpp"
#include "svshrink/priors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace svshrink::regression {

struct RegressionProblem {
  Matrix design;           // n x p
  Matrix response;         // n x q
  double noise_var;        // sigma^2 > 0
  Matrix future_design;    // n~ x p
  double future_noise_var; // sigma~^2 > 0

  RegressionProblem(Matrix x, Matrix y, double s2, Matrix xf, double s2f)
      : design(std::move(x)), response(std::move(y)), noise_var(s2),
        future_design(std::move(xf)), future_noise_var(s2f) {
    if (design.rows() != response.rows()) {
      throw std::invalid_argument("RegressionProblem: X and Y row mismatch");
    }
    if (design.cols() < response.cols()) {
      throw std::invalid_argument("RegressionProblem: requires p >= q");
    }
    if (!(noise_var > 0.0) || !(future_noise_var > 0.0)) {
      throw std::invalid_argument("RegressionProblem: noise variances must be positive");
    }
  }

  int p() const { return static_cast<int>(design.cols()); }
  int q() const { return static_cast<int>(response.cols()); }
};

struct Reduction {
  Matrix y1;            // p x q, distributed N(B, sigma^2 (X'X)^{-1}, I)
  Matrix y1_cov_scale;  // p x p, sigma^2 (X'X)^{-1}
  Matrix y2;            // n x q residual, X' Y2 = 0
};

inline Reduction reduce(const RegressionProblem& problem) {
  const Matrix& x = problem.design;
  const Matrix xtx = x.transpose() * x;
  Eigen::FullPivLU<Matrix> lu(xtx);
  if (!lu.isInvertible()) {
    throw std::domain_error("reduce: X^T X is singular");
  }
  Reduction out;
  out.y1 = lu.solve(x.transpose() * problem.response);
  out.y1_cov_scale = problem.noise_var * lu.inverse();
  out.y2 = problem.response - x * out.y1;
  return out;
}

struct CovariancePairGeneral {
  Matrix obs_cov;  // pq x pq, Sigma (x) C of the observations
  Matrix fut_cov;  // pq x pq, Sigma~ (x) C~ of the future data

  CovariancePairGeneral(Matrix obs, Matrix fut)
      : obs_cov(std::move(obs)), fut_cov(std::move(fut)) {
    check_spd(obs_cov, "obs_cov");
    check_spd(fut_cov, "fut_cov");
    if (obs_cov.rows() != fut_cov.rows()) {
      throw std::invalid_argument("CovariancePairGeneral: dimension mismatch");
    }
  }

 private:
  static void check_spd(const Matrix& s, const char* name) {
    if (s.rows() != s.cols()) {
      throw std::invalid_argument(std::string("CovariancePairGeneral: ") + name +
                                  " must be square");
    }
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + s.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument(std::string("CovariancePairGeneral: ") + name +
                                  " must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw std::domain_error(std::string("CovariancePairGeneral: ") + name +
                              " must be positive definite");
    }
  }
};

namespace detail {

inline Matrix spd_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  return es.operatorSqrt();
}

}  // namespace detail

// A* = Sigma1^{1/2} U^T (Lambda^{-1} - I)^{1/2} from
// Sigma1 = (obs^{-1} + fut^{-1})^{-1}, Sigma2 = obs, and the
// diagonalization Sigma1^{1/2} Sigma2^{-1} Sigma1^{1/2} = U^T Lambda U.
// Sigma1 < Sigma2 forces Lambda < I, so the square root exists.
// Eigenvalues are ordered descending and eigenvector signs canonicalized
// to make the output deterministic.
inline Matrix build_a_star(const CovariancePairGeneral& cov) {
  const Matrix sigma2 = cov.obs_cov;
  const Matrix sigma1 =
      (cov.obs_cov.inverse() + cov.fut_cov.inverse()).inverse();
  const Matrix root1 = detail::spd_sqrt(sigma1);
  const Matrix middle = root1 * sigma2.inverse() * root1;

  Eigen::SelfAdjointEigenSolver<Matrix> es(middle);
  const int d = static_cast<int>(middle.rows());
  // Descending eigenvalues with a stable tie order, sign rule: leading
  // nonzero entry positive.
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  Matrix vecs(d, d);
  Vector vals(d);
  for (int i = 0; i < d; ++i) {
    vals(i) = es.eigenvalues()(order[i]);
    Vector col = es.eigenvectors().col(order[i]);
    int lead = 0;
    while (lead < d - 1 && std::abs(col(lead)) < 1e-12) ++lead;
    if (col(lead) < 0.0) col = -col;
    vecs.col(i) = col;
  }
  Vector scale(d);
  for (int i = 0; i < d; ++i) {
    if (!(vals(i) > 0.0) || !(vals(i) < 1.0)) {
      throw std::domain_error("build_a_star: spectrum not inside (0, 1)");
    }
    scale(i) = std::sqrt(1.0 / vals(i) - 1.0);
  }
  return root1 * vecs * scale.asDiagonal();
}

// log of the transformed shrinkage prior pi(M) = pi_SVS(unvec((A*)^{-1} vec M)).
inline double prior_koba_eval(const Matrix& a_star, const ModelSpec& spec,
                              const Matrix& m_matrix) {
  if (a_star.rows() != spec.dim() || a_star.cols() != spec.dim()) {
    throw std::invalid_argument("prior_koba_eval: a_star must be nm x nm");
  }
  return priors::log_prior(priors::PriorKind::transformed_svs(a_star), spec, m_matrix);
}

struct KobaPointResult {
  double laplacian = 0.0;
  double budget = 0.0;   // finite-difference error scale at the point
  bool excluded = false; // degenerate point, skipped with a note
  bool flagged = false;  // laplacian exceeded the budget
};

struct KobaReport {
  std::vector<KobaPointResult> points;
  int flagged_count = 0;
  int excluded_count = 0;
};

// Ambient finite-difference Laplacian of the composed field
//   v -> backend_prior( unvec( (A*)^{-1} F vec(v) ) ),
// where F defaults to A* itself, making the field literally the backend
// prior density at v; superharmonicity demands nonpositive values up to
// the finite-difference error budget.  Passing a non-matching F (negative
// control) breaks the cancellation and exposes positive curvature.
inline KobaReport koba_superharmonicity_check(
    const Matrix& a_star, const ModelSpec& spec,
    const std::vector<Matrix>& sample_points, double h,
    const priors::PriorKind& backend = priors::PriorKind::svs(),
    const Matrix* forward_override = nullptr) {
  if (backend.tag != priors::PriorKind::Tag::Svs &&
      backend.tag != priors::PriorKind::Tag::RegularizedSvs) {
    throw std::invalid_argument(
        "koba_superharmonicity_check: backend must be SVS or RegularizedSVS");
  }
  Eigen::FullPivLU<Matrix> lu(a_star);
  if (!lu.isInvertible()) {
    throw std::invalid_argument("koba_superharmonicity_check: a_star singular");
  }
  const Matrix forward = forward_override ? *forward_override : a_star;
  auto field = [&](const Matrix& v_mat) {
    const Vector w = lu.solve(forward * priors::vec_rowmajor(v_mat));
    return std::exp(
        priors::log_prior(backend, spec, priors::unvec_rowmajor(w, spec.n, spec.m)));
  };
  KobaReport report;
  for (const Matrix& pt : sample_points) {
    KobaPointResult r;
    try {
      r.laplacian = priors::fd_laplacian(field, pt, h);
      r.budget = 1e-3 * priors::fd_second_difference_scale(field, pt, h);
      r.flagged = r.laplacian > r.budget;
    } catch (const std::domain_error&) {
      r.excluded = true;
    }
    if (r.excluded) {
      ++report.excluded_count;
    } else if (r.flagged) {
      ++report.flagged_count;
    }
    report.points.push_back(r);
  }
  return report;
}

}  // namespace svshrink::regression
