#pragma once

// Prior densities on the mean matrix, the marginal likelihood under the
// singular value shrinkage prior, log-marginal gradients, and numerical
// superharmonicity checks in ambient and singular-value coordinates.

#include "svshrink/common.hpp"
#include "svshrink/matnorm.hpp"
#include "svshrink/zonal.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace svshrink::priors {

using zonal::SeriesControl;

struct PriorKind {
  enum class Tag { Uniform, Stein, Svs, RegularizedSvs, TransformedSvs };

  Tag tag = Tag::Uniform;
  int k = 0;        // RegularizedSvs only
  Matrix a_star;    // TransformedSvs only, nm x nm invertible

  static PriorKind uniform() { return {Tag::Uniform, 0, {}}; }
  static PriorKind stein() { return {Tag::Stein, 0, {}}; }
  static PriorKind svs() { return {Tag::Svs, 0, {}}; }
  static PriorKind regularized_svs(int k) {
    if (k < 1) throw std::invalid_argument("RegularizedSvs: k >= 1");
    return {Tag::RegularizedSvs, k, {}};
  }
  static PriorKind transformed_svs(Matrix a_star) {
    Eigen::FullPivLU<Matrix> lu(a_star);
    if (!lu.isInvertible()) {
      throw std::invalid_argument("TransformedSvs: a_star must be invertible");
    }
    return {Tag::TransformedSvs, 0, std::move(a_star)};
  }
};

// vec convention used for the transformed priors: row-major stacking,
// i.e. vec(M^T), the ordering under which the model covariance is a
// Kronecker product.
inline Vector vec_rowmajor(const Matrix& m) {
  Vector v(m.size());
  int idx = 0;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) v(idx++) = m(i, j);
  }
  return v;
}

inline Matrix unvec_rowmajor(const Vector& v, int rows, int cols) {
  if (v.size() != rows * cols) {
    throw std::invalid_argument("unvec_rowmajor: size mismatch");
  }
  Matrix m(rows, cols);
  int idx = 0;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = v(idx++);
  }
  return m;
}

// Log prior density; +infinity marks the genuine singularities (rank
// deficient M under the shrinkage prior, M = 0 under the Stein prior).
inline double log_prior(const PriorKind& kind, const ModelSpec& spec,
                        const Matrix& m_matrix) {
  spec.check_dims(m_matrix, "log_prior: m");
  const double inf = std::numeric_limits<double>::infinity();
  switch (kind.tag) {
    case PriorKind::Tag::Uniform:
      return 0.0;
    case PriorKind::Tag::Stein: {
      const double norm = m_matrix.norm();
      if (norm == 0.0) return inf;
      return -(spec.dim() - 2.0) * std::log(norm);
    }
    case PriorKind::Tag::Svs: {
      const Vector sigma = matnorm::singular_values(m_matrix);
      double s = 0.0;
      for (int i = 0; i < sigma.size(); ++i) {
        if (sigma(i) <= 0.0) return inf;
        s += std::log(sigma(i));
      }
      return -(spec.n - spec.m - 1.0) * s;
    }
    case PriorKind::Tag::RegularizedSvs: {
      Eigen::SelfAdjointEigenSolver<Matrix> es(m_matrix.transpose() * m_matrix);
      double s = 0.0;
      for (int i = 0; i < spec.m; ++i) {
        s += std::log(std::max(es.eigenvalues()(i), 0.0) + 1.0 / kind.k);
      }
      return -0.5 * (spec.n - spec.m - 1.0) * s;
    }
    case PriorKind::Tag::TransformedSvs: {
      const Vector w = kind.a_star.partialPivLu().solve(vec_rowmajor(m_matrix));
      return log_prior(PriorKind::svs(), spec, unvec_rowmajor(w, spec.n, spec.m));
    }
  }
  throw std::logic_error("log_prior: unknown prior kind");
}

struct MarginalResult {
  double log_value = 0.0;
  int terms_used = 0;
};

namespace detail {

inline std::vector<double> scaled_gram_eigenvalues(const Matrix& y, double denom) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(y.transpose() * y / denom);
  std::vector<double> eigs(es.eigenvalues().size());
  for (std::size_t i = 0; i < eigs.size(); ++i) {
    eigs[i] = std::max(es.eigenvalues()(static_cast<int>(i)), 0.0);
  }
  return eigs;
}

}  // namespace detail

// log m_SVS(Y; v I_n, I_m) = log of the prior-integrated sampling density
//   m(Y; v) = v^{-m(n-m-1)/2} * c_nm * etr(-S) 1F1((m+1)/2; n/2; S),
// S = Y^T Y / (2v),  c_nm = 2^{-m(n-m-1)/2} Gamma_m((m+1)/2) / Gamma_m(n/2).
// The scale factor is what integration of the prior against N(Y; M, vI, I)
// produces; it is validated against Monte Carlo in the tests.
inline MarginalResult log_marginal_svs_ex(const ModelSpec& spec, const Matrix& y,
                                          double scale, const SeriesControl& ctrl) {
  spec.check_dims(y, "log_marginal_svs: y");
  if (!(scale > 0.0)) throw std::invalid_argument("log_marginal_svs: scale > 0");
  const int n = spec.n, m = spec.m;
  const double half_mh = 0.5 * m * (n - m - 1.0);
  const auto eigs = detail::scaled_gram_eigenvalues(y, 2.0 * scale);
  const auto f = zonal::hyp1f1_log_scaled(0.5 * (m + 1), 0.5 * n, eigs, ctrl);
  if (!f.converged) {
    throw ConvergenceError(
        "log_marginal_svs: 1F1 series did not converge within max_order",
        f.terms_used);
  }
  MarginalResult out;
  out.terms_used = f.terms_used;
  out.log_value = -half_mh * std::log(scale) - half_mh * std::log(2.0) +
                  zonal::mv_lgamma(m, 0.5 * (m + 1)) - zonal::mv_lgamma(m, 0.5 * n) +
                  f.log_value;
  return out;
}

inline double log_marginal_svs(const ModelSpec& spec, const Matrix& y, double scale,
                               const SeriesControl& ctrl = {}) {
  return log_marginal_svs_ex(spec, y, scale, ctrl).log_value;
}

// Stein-prior marginal: the m = 1 specialization of the formula above
// applied to vec(Y) with d = nm.
inline MarginalResult log_marginal_stein_ex(const ModelSpec& spec, const Matrix& y,
                                            double scale, const SeriesControl& ctrl) {
  spec.check_dims(y, "log_marginal_stein: y");
  if (!(scale > 0.0)) throw std::invalid_argument("log_marginal_stein: scale > 0");
  const double d = static_cast<double>(spec.dim());
  const double half_dh = 0.5 * (d - 2.0);
  const std::vector<double> eigs = {y.squaredNorm() / (2.0 * scale)};
  const auto f = zonal::hyp1f1_log_scaled(1.0, 0.5 * d, eigs, ctrl);
  if (!f.converged) {
    throw ConvergenceError(
        "log_marginal_stein: 1F1 series did not converge within max_order",
        f.terms_used);
  }
  MarginalResult out;
  out.terms_used = f.terms_used;
  out.log_value = -half_dh * std::log(scale) - half_dh * std::log(2.0) -
                  std::lgamma(0.5 * d) + f.log_value;
  return out;
}

inline double log_marginal_stein(const ModelSpec& spec, const Matrix& y, double scale,
                                 const SeriesControl& ctrl = {}) {
  return log_marginal_stein_ex(spec, y, scale, ctrl).log_value;
}

struct GradResult {
  Matrix grad;
  int max_terms_used = 0;
};

// Entrywise central difference of the log marginal, the scheme the risk
// experiments use (default eps 1e-6).
inline GradResult grad_log_marginal_ex(const PriorKind& kind, const ModelSpec& spec,
                                       const Matrix& y, double scale, double eps,
                                       const SeriesControl& ctrl = {}) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_log_marginal: eps > 0");
  if (kind.tag != PriorKind::Tag::Svs && kind.tag != PriorKind::Tag::Stein) {
    throw std::invalid_argument("grad_log_marginal: only SVS and Stein marginals");
  }
  spec.check_dims(y, "grad_log_marginal: y");
  const bool svs = kind.tag == PriorKind::Tag::Svs;
  GradResult out;
  out.grad.resize(spec.n, spec.m);
  Matrix point = y;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.m; ++j) {
      point(i, j) = y(i, j) + eps;
      const auto up = svs ? log_marginal_svs_ex(spec, point, scale, ctrl)
                          : log_marginal_stein_ex(spec, point, scale, ctrl);
      point(i, j) = y(i, j) - eps;
      const auto dn = svs ? log_marginal_svs_ex(spec, point, scale, ctrl)
                          : log_marginal_stein_ex(spec, point, scale, ctrl);
      point(i, j) = y(i, j);
      out.grad(i, j) = (up.log_value - dn.log_value) / (2.0 * eps);
      out.max_terms_used = std::max({out.max_terms_used, up.terms_used, dn.terms_used});
    }
  }
  return out;
}

inline Matrix grad_log_marginal(const PriorKind& kind, const ModelSpec& spec,
                                const Matrix& y, double scale, double eps = 1e-6,
                                const SeriesControl& ctrl = {}) {
  return grad_log_marginal_ex(kind, spec, y, scale, eps, ctrl).grad;
}

// Ambient finite-difference Laplacian over all nm entries.
template <typename Field>
double fd_laplacian(Field&& f, const Matrix& point, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_laplacian: h > 0");
  Matrix x = point;
  const double center = f(point);
  if (!std::isfinite(center)) {
    throw std::domain_error("fd_laplacian: field not finite at the center point");
  }
  double acc = 0.0;
  for (int i = 0; i < point.rows(); ++i) {
    for (int j = 0; j < point.cols(); ++j) {
      x(i, j) = point(i, j) + h;
      const double up = f(x);
      x(i, j) = point(i, j) - h;
      const double dn = f(x);
      x(i, j) = point(i, j);
      if (!std::isfinite(up) || !std::isfinite(dn)) {
        throw std::domain_error("fd_laplacian: field not finite at a stencil point");
      }
      acc += (up - 2.0 * center + dn) / (h * h);
    }
  }
  return acc;
}

// Sum of absolute per-direction second differences; the natural error scale
// against which a near-zero Laplacian is judged.
template <typename Field>
double fd_second_difference_scale(Field&& f, const Matrix& point, double h) {
  Matrix x = point;
  const double center = f(point);
  double acc = 0.0;
  for (int i = 0; i < point.rows(); ++i) {
    for (int j = 0; j < point.cols(); ++j) {
      x(i, j) = point(i, j) + h;
      const double up = f(x);
      x(i, j) = point(i, j) - h;
      const double dn = f(x);
      x(i, j) = point(i, j);
      acc += std::abs((up - 2.0 * center + dn) / (h * h));
    }
  }
  return acc;
}

// Laplacian restricted to the entries of one column.
template <typename Field>
double fd_laplacian_column(Field&& f, const Matrix& point, int column, double h) {
  if (column < 0 || column >= point.cols()) {
    throw std::invalid_argument("fd_laplacian_column: column out of range");
  }
  Matrix x = point;
  const double center = f(point);
  double acc = 0.0;
  for (int i = 0; i < point.rows(); ++i) {
    x(i, column) = point(i, column) + h;
    const double up = f(x);
    x(i, column) = point(i, column) - h;
    const double dn = f(x);
    x(i, column) = point(i, column);
    if (!std::isfinite(up) || !std::isfinite(dn) || !std::isfinite(center)) {
      throw std::domain_error("fd_laplacian_column: field not finite at a stencil point");
    }
    acc += (up - 2.0 * center + dn) / (h * h);
  }
  return acc;
}

struct SphereAverage {
  double average = 0.0;
  double std_error = 0.0;
  double center_value = 0.0;
};

// Monte Carlo average of f over the sphere of the given radius around
// `center` in R^{nm}; superharmonicity demands average <= center value.
template <typename Field>
SphereAverage sphere_average_test(Field&& f, const Matrix& center, double radius,
                                  int draws, RngStream& rng) {
  if (!(radius > 0.0)) throw std::invalid_argument("sphere_average_test: radius > 0");
  if (draws < 2) throw std::invalid_argument("sphere_average_test: draws >= 2");
  std::vector<double> values(draws);
  for (int d = 0; d < draws; ++d) {
    Matrix g = rng.normal_matrix(static_cast<int>(center.rows()),
                                 static_cast<int>(center.cols()));
    g *= radius / g.norm();
    values[d] = f(Matrix(center + g));
  }
  const auto ms = summarize(values);
  return {ms.mean, ms.std_error, f(center)};
}

struct SvPartials {
  Vector first;
  Vector second;
};

// Laplacian in the singular-value coordinate system:
//   2 sum_{i<j} (s_i g_i - s_j g_j)/(s_i^2 - s_j^2)
//   + (n-m) sum_i g_i / s_i + sum_i g''_i
// for a function of the singular values alone; requires distinct positive
// singular values.
inline double sv_laplacian(const Vector& sigma, const ModelSpec& spec,
                           const SvPartials& partials) {
  const int m = spec.m;
  if (sigma.size() != m || partials.first.size() != m || partials.second.size() != m) {
    throw std::invalid_argument("sv_laplacian: size mismatch");
  }
  for (int i = 0; i < m; ++i) {
    if (!(sigma(i) > 0.0)) {
      throw std::domain_error("sv_laplacian: singular values must be positive");
    }
    for (int j = i + 1; j < m; ++j) {
      if (std::abs(sigma(i) - sigma(j)) <= 1e-6) {
        throw std::domain_error("sv_laplacian: singular values too close");
      }
    }
  }
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      acc += 2.0 * (sigma(i) * partials.first(i) - sigma(j) * partials.first(j)) /
             (sigma(i) * sigma(i) - sigma(j) * sigma(j));
    }
  }
  for (int i = 0; i < m; ++i) {
    acc += (spec.n - spec.m) * partials.first(i) / sigma(i);
    acc += partials.second(i);
  }
  return acc;
}

// Central-difference partials of a function of the singular values, for
// feeding sv_laplacian when analytic derivatives are not at hand.
template <typename G>
SvPartials fd_sv_partials(G&& g, const Vector& sigma, double h) {
  SvPartials out;
  const int m = static_cast<int>(sigma.size());
  out.first.resize(m);
  out.second.resize(m);
  Vector x = sigma;
  const double center = g(sigma);
  for (int i = 0; i < m; ++i) {
    x(i) = sigma(i) + h;
    const double up = g(x);
    x(i) = sigma(i) - h;
    const double dn = g(x);
    x(i) = sigma(i);
    out.first(i) = (up - dn) / (2.0 * h);
    out.second(i) = (up - 2.0 * center + dn) / (h * h);
  }
  return out;
}

// Riemannian volume density restricted to the singular-value coordinates:
//   |g| = prod_{i<j} (s_i^2 - s_j^2)^2 * prod_i s_i^{2(n-m)}.
// Degenerate inputs return the exact limit 0.
inline double metric_det(const Vector& sigma, const ModelSpec& spec) {
  if (sigma.size() != spec.m) throw std::invalid_argument("metric_det: size mismatch");
  double prod = 1.0;
  for (int i = 0; i < spec.m; ++i) {
    for (int j = i + 1; j < spec.m; ++j) {
      const double d = sigma(i) * sigma(i) - sigma(j) * sigma(j);
      prod *= d * d;
    }
  }
  for (int i = 0; i < spec.m; ++i) {
    for (int t = 0; t < 2 * (spec.n - spec.m); ++t) prod *= sigma(i);
  }
  return prod;
}

}  // namespace svshrink::priors
