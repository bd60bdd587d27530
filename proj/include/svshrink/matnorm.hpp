#pragma once

// Matrix-variate Normal sampling and densities with isotropic row
// covariance scale*I_n and identity column covariance, plus a
// deterministic SVD.  vec of a draw has covariance scale*I_{nm}, which is
// all the in-scope experiments need.

#include "svshrink/common.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace svshrink::matnorm {

// Draw from N_{n,m}(mean, scale*I_n, I_m).
inline Matrix sample(const ModelSpec& spec, const Matrix& mean, double scale,
                     RngStream& rng) {
  spec.check_dims(mean, "sample: mean");
  if (!(scale > 0.0)) throw std::invalid_argument("sample: scale must be positive");
  return mean + std::sqrt(scale) * rng.normal_matrix(spec.n, spec.m);
}

inline double log_density(const ModelSpec& spec, const Matrix& x,
                          const Matrix& mean, double scale) {
  spec.check_dims(x, "log_density: x");
  spec.check_dims(mean, "log_density: mean");
  if (!(scale > 0.0)) throw std::invalid_argument("log_density: scale must be positive");
  const double d = static_cast<double>(spec.dim());
  return -0.5 * d * std::log(2.0 * M_PI * scale) -
         (x - mean).squaredNorm() / (2.0 * scale);
}

struct SvdResult {
  Matrix u;      // n x n orthogonal
  Vector sigma;  // m descending nonnegative singular values
  Matrix v;      // m x m orthogonal
};

// Full SVD x = U Sigma V^T with descending singular values and a
// deterministic sign convention: each column of U gets a positive leading
// entry, with the matching column of V flipped to preserve the product.
inline SvdResult svd(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> solver(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdResult out;
  out.u = solver.matrixU();
  out.sigma = solver.singularValues();
  out.v = solver.matrixV();
  const int n = static_cast<int>(out.u.cols());
  const int m = static_cast<int>(out.v.cols());
  for (int j = 0; j < n; ++j) {
    int lead = 0;
    while (lead < n - 1 && std::abs(out.u(lead, j)) < 1e-12) ++lead;
    if (out.u(lead, j) < 0.0) {
      out.u.col(j) = -out.u.col(j);
      if (j < m) out.v.col(j) = -out.v.col(j);
    }
  }
  return out;
}

inline Vector singular_values(const Matrix& x) {
  return Eigen::JacobiSVD<Matrix>(x).singularValues();
}

}  // namespace svshrink::matnorm
