#pragma once

// Shared basic types: model specification, seeded random streams, errors.

#include <Eigen/Dense>

#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace svshrink {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Problem dimensions and isotropic covariance scales.  The model keeps
// row covariance v*I_n and column covariance I_m; n - m >= 2 is required
// throughout (the priors are not integrable otherwise).
struct ModelSpec {
  int n = 0;
  int m = 0;
  double v1 = 1.0;
  double v2 = 1.0;

  ModelSpec(int n_, int m_, double v1_ = 1.0, double v2_ = 1.0)
      : n(n_), m(m_), v1(v1_), v2(v2_) {
    if (n <= 0 || m <= 0) {
      throw std::invalid_argument("ModelSpec: dimensions must be positive");
    }
    if (n - m < 2) {
      throw std::invalid_argument(
          "ModelSpec: n - m >= 2 is required, got n=" + std::to_string(n) +
          ", m=" + std::to_string(m));
    }
    if (!(v1 > 0.0) || !(v2 > 0.0)) {
      throw std::invalid_argument("ModelSpec: v1 and v2 must be positive");
    }
  }

  int dim() const { return n * m; }

  // Harmonic-mean scale of the sufficient statistic; 0 < v0 < v1.
  double v0() const { return v1 * v2 / (v1 + v2); }

  void check_dims(const Matrix& x, const char* what) const {
    if (x.rows() != n || x.cols() != m) {
      throw std::invalid_argument(std::string(what) + ": expected " +
                                  std::to_string(n) + "x" + std::to_string(m) +
                                  " matrix, got " + std::to_string(x.rows()) +
                                  "x" + std::to_string(x.cols()));
    }
  }
};

// Raised when the truncated zonal series hits max_order without meeting
// the requested tolerance.  Carries the number of orders consumed.
struct ConvergenceError : std::runtime_error {
  int terms_used;
  explicit ConvergenceError(const std::string& msg, int terms)
      : std::runtime_error(msg), terms_used(terms) {}
};

// Deterministic random stream.  Each consumer constructs its own stream
// from explicit seed words, so results are independent of evaluation
// order and thread scheduling.  Normal deviates use Box-Muller on
// explicitly constructed uniforms to keep the byte-for-byte output of a
// given binary stable across standard-library versions.
class RngStream {
 public:
  explicit RngStream(std::initializer_list<std::uint64_t> seeds) {
    std::vector<std::uint32_t> words;
    for (std::uint64_t s : seeds) {
      words.push_back(static_cast<std::uint32_t>(s & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(s >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    eng_.seed(seq);
  }

  static RngStream for_replication(std::uint64_t master_seed,
                                   std::uint64_t stream,
                                   std::uint64_t replication) {
    return RngStream{master_seed, stream, replication};
  }

  double uniform01() {
    // 53-bit mantissa in (0, 1]; never exactly 0 so log() is safe.
    const std::uint64_t bits = eng_() >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Matrix normal_matrix(int rows, int cols) {
    Matrix g(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        g(i, j) = normal();
      }
    }
    return g;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Order-insensitive deterministic reduction: pairwise summation gives the
// same result no matter how the values were produced.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanStderr summarize(std::span<const double> xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  out.mean = pairwise_sum(xs) / n;
  if (xs.size() < 2) return out;
  std::vector<double> dev2(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - out.mean;
    dev2[i] = d * d;
  }
  const double var = pairwise_sum(dev2) / (n - 1.0);
  out.std_error = std::sqrt(var / n);
  return out;
}

}  // namespace svshrink
