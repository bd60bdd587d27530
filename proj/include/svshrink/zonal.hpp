#pragma once

// Integer partitions, zonal polynomials, the confluent hypergeometric
// function of matrix argument 1F1(a; b; S), and the multivariate gamma
// function.
//
// 1F1 is evaluated as the truncated zonal polynomial series
//   sum_k sum_{kappa |- k} [(a)_kappa / (b)_kappa] C_kappa(S) / k!
// grouped by weight k.  Each weight's inner sum is a symmetric polynomial
// in the eigenvalues; its coefficients in the monomial symmetric basis are
// produced by a recursion over the dominance lattice of partitions (box
// moves) and cached per (a, b, m).  Individual C_kappa values use the
// classical coefficient recursion for zonal polynomials with the same
// lattice moves.  The series degrades for matrix arguments whose
// eigenvalues are large: the truncation order needed grows roughly like
// tr S, so callers must budget max_order accordingly; non-convergence is
// always surfaced through the returned flag.

#include "svshrink/common.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <unordered_map>
#include <utility>

namespace svshrink::zonal {

// Weakly decreasing positive integer parts; the empty partition is valid.
struct Partition {
  std::vector<int> parts;

  Partition() = default;
  Partition(std::initializer_list<int> p) : parts(p) { validate(); }
  explicit Partition(std::vector<int> p) : parts(std::move(p)) { validate(); }

  int weight() const { return std::accumulate(parts.begin(), parts.end(), 0); }
  int length() const { return static_cast<int>(parts.size()); }
  int part(int i) const {  // 0-based, 0 beyond the length
    return i < length() ? parts[i] : 0;
  }

  void validate() const {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i] <= 0) {
        throw std::invalid_argument("Partition: parts must be positive");
      }
      if (i > 0 && parts[i] > parts[i - 1]) {
        throw std::invalid_argument("Partition: parts must be weakly decreasing");
      }
    }
  }

  bool operator==(const Partition& o) const { return parts == o.parts; }
};

// Truncation control for the zonal series.
struct SeriesControl {
  int max_order = 60;
  double rel_tol = 1e-12;

  SeriesControl() = default;
  SeriesControl(int k, double tol) : max_order(k), rel_tol(tol) {
    if (max_order < 1) throw std::invalid_argument("SeriesControl: max_order >= 1");
    if (!(rel_tol > 0)) throw std::invalid_argument("SeriesControl: rel_tol > 0");
  }
};

namespace detail {

// Emits all partitions of `k` into at most `max_parts` parts in descending
// lexicographic order (a linear extension of dominance order).  The buffer
// passed to `fn` has exactly `max_parts` entries, zero padded.
template <typename Fn>
void enumerate_padded(int k, int max_parts, Fn&& fn) {
  std::vector<int> buf(max_parts, 0);
  auto rec = [&](auto&& self, int pos, int remaining, int max_part) -> void {
    const int slots_left = max_parts - pos;
    if (remaining == 0) {
      std::fill(buf.begin() + pos, buf.end(), 0);
      fn(buf);
      return;
    }
    if (slots_left == 0) return;
    const int lo = (remaining + slots_left - 1) / slots_left;
    for (int p = std::min(max_part, remaining); p >= lo; --p) {
      buf[pos] = p;
      self(self, pos + 1, remaining - p, p);
    }
    buf[pos] = 0;
  };
  rec(rec, 0, k, k);
}

inline double rho(const std::vector<int>& parts) {
  double r = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    r += static_cast<double>(parts[i]) * (parts[i] - static_cast<double>(i + 1));
  }
  return r;
}

// Monomial symmetric polynomial m_nu at the given values; `nu` is zero
// padded to the number of variables.
inline double monomial_sym(const std::vector<int>& nu_padded,
                           const std::vector<double>& x) {
  std::vector<int> e(nu_padded);
  std::sort(e.begin(), e.end());
  double total = 0.0;
  do {
    double prod = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int t = 0; t < e[i]; ++t) prod *= x[i];
    }
    total += prod;
  } while (std::next_permutation(e.begin(), e.end()));
  return total;
}

}  // namespace detail

// All partitions of weight k with at most max_length parts, in reverse
// lexicographic order.  k = 0 yields the single empty partition.
inline std::vector<Partition> partitions_of(int k, int max_length) {
  if (k < 0) throw std::invalid_argument("partitions_of: k must be nonnegative");
  if (max_length < 1) throw std::invalid_argument("partitions_of: max_length >= 1");
  std::vector<Partition> out;
  detail::enumerate_padded(k, std::min(max_length, std::max(k, 1)),
                           [&](const std::vector<int>& buf) {
                             Partition p;
                             for (int v : buf) {
                               if (v > 0) p.parts.push_back(v);
                             }
                             out.push_back(std::move(p));
                           });
  return out;
}

// Generalized Pochhammer symbol at the zonal parameter:
//   (a)_kappa = prod_i prod_{j=0}^{kappa_i - 1} (a - (i-1)/2 + j).
inline double gen_pochhammer(double a, const Partition& kappa) {
  double prod = 1.0;
  for (int i = 0; i < kappa.length(); ++i) {
    const double base = a - 0.5 * i;
    for (int j = 0; j < kappa.parts[i]; ++j) {
      prod *= base + j;
    }
  }
  return prod;
}

// log Gamma_m(a) = m(m-1)/4 * log pi + sum_i lgamma(a - (i-1)/2).
inline double mv_lgamma(int m, double a) {
  if (m < 1) throw std::invalid_argument("mv_lgamma: m >= 1");
  if (!(a > 0.5 * (m - 1))) {
    throw std::domain_error("mv_lgamma: requires a > (m-1)/2");
  }
  double lg = 0.25 * m * (m - 1) * std::log(M_PI);
  for (int i = 0; i < m; ++i) {
    lg += std::lgamma(a - 0.5 * i);
  }
  return lg;
}

inline double mv_gamma(int m, double a) { return std::exp(mv_lgamma(m, a)); }

namespace detail {

// Coefficients of the weight-k zonal polynomials in the monomial symmetric
// basis.  Row i holds C_{kappa_i} = sum_j coef[i][j] m_{nu_j} over the
// partitions of k in reverse lexicographic order.
struct ZonalWeightTable {
  std::vector<std::vector<int>> parts;  // trimmed partitions of k
  std::vector<std::vector<double>> coef;
};

// Builds the table by the classical recursion: with rho(kappa) =
// sum_i kappa_i (kappa_i - i), the coefficient of m_nu in the monic (Jack P)
// polynomial satisfies
//   c_{kappa,nu} = sum_{moves} (nu_i - nu_j + 2t) c_{kappa,mu} / (rho_kappa - rho_nu),
// where mu is nu with t boxes moved from part j to part i < j, each (i,j,t)
// move counted separately.  The normalization making
// sum_{kappa |- k} C_kappa(S) = (tr S)^k is then fixed by a triangular solve
// against the multinomial expansion of (tr S)^k.
inline std::shared_ptr<const ZonalWeightTable> zonal_weight_table(int k) {
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const ZonalWeightTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;

  auto tab = std::make_shared<ZonalWeightTable>();
  if (k == 0) {
    tab->parts = {{}};
    tab->coef = {{1.0}};
    cache.emplace(k, tab);
    return tab;
  }

  // Partition list and index lookup.
  std::map<std::vector<int>, int> index;
  detail::enumerate_padded(k, k, [&](const std::vector<int>& buf) {
    std::vector<int> trimmed;
    for (int v : buf) {
      if (v > 0) trimmed.push_back(v);
    }
    index.emplace(trimmed, static_cast<int>(tab->parts.size()));
    tab->parts.push_back(std::move(trimmed));
  });
  const int np = static_cast<int>(tab->parts.size());
  std::vector<double> rhos(np);
  for (int i = 0; i < np; ++i) rhos[i] = detail::rho(tab->parts[i]);

  // Monic coefficients, one row per kappa.
  std::vector<std::vector<double>> pc(np, std::vector<double>(np, 0.0));
  for (int ki = 0; ki < np; ++ki) {
    pc[ki][ki] = 1.0;
    for (int vi = ki + 1; vi < np; ++vi) {
      const std::vector<int>& nu = tab->parts[vi];
      const int len = static_cast<int>(nu.size());
      double acc = 0.0;
      for (int j = 1; j < len; ++j) {
        for (int i = 0; i < j; ++i) {
          for (int t = 1; t <= nu[j]; ++t) {
            std::vector<int> w(nu);
            w[i] += t;
            w[j] -= t;
            std::sort(w.begin(), w.end(), std::greater<int>());
            while (!w.empty() && w.back() == 0) w.pop_back();
            auto mit = index.find(w);
            if (mit == index.end()) continue;
            const double c_mu = pc[ki][mit->second];
            if (c_mu != 0.0) {
              acc += (nu[i] - nu[j] + 2.0 * t) * c_mu;
            }
          }
        }
      }
      pc[ki][vi] = (acc == 0.0) ? 0.0 : acc / (rhos[ki] - rhos[vi]);
    }
  }

  // Rescale rows so the weight-k sum identity holds: solve
  // sum_kappa g_kappa P_kappa = (m_(1))^k from the dominance top down.
  std::vector<double> g(np, 0.0);
  for (int vi = 0; vi < np; ++vi) {
    double target = std::exp(std::lgamma(k + 1.0) -
                             [&] {
                               double s = 0.0;
                               for (int p : tab->parts[vi]) s += std::lgamma(p + 1.0);
                               return s;
                             }());
    for (int ki = 0; ki < vi; ++ki) target -= g[ki] * pc[ki][vi];
    g[vi] = target;  // pc[vi][vi] == 1
  }

  tab->coef.assign(np, std::vector<double>(np, 0.0));
  for (int ki = 0; ki < np; ++ki) {
    for (int vi = ki; vi < np; ++vi) {
      tab->coef[ki][vi] = g[ki] * pc[ki][vi];
    }
  }
  cache.emplace(k, tab);
  return tab;
}

}  // namespace detail

// C_kappa(S) for a symmetric matrix with the given eigenvalues, normalized
// so that sum_{kappa |- k} C_kappa(S) = (tr S)^k.  Zero when the partition
// is longer than the eigenvalue list.
inline double zonal_polynomial(const Partition& kappa,
                               const std::vector<double>& eigenvalues) {
  const int m = static_cast<int>(eigenvalues.size());
  if (kappa.length() > m) return 0.0;
  const int k = kappa.weight();
  if (k == 0) return 1.0;
  auto tab = detail::zonal_weight_table(k);
  int row = -1;
  for (std::size_t i = 0; i < tab->parts.size(); ++i) {
    if (tab->parts[i] == kappa.parts) {
      row = static_cast<int>(i);
      break;
    }
  }
  if (row < 0) throw std::logic_error("zonal_polynomial: partition not found");
  double total = 0.0;
  std::vector<int> padded(m, 0);
  for (std::size_t j = 0; j < tab->parts.size(); ++j) {
    const double c = tab->coef[row][j];
    if (c == 0.0) continue;
    const std::vector<int>& nu = tab->parts[j];
    if (static_cast<int>(nu.size()) > m) continue;
    std::fill(padded.begin(), padded.end(), 0);
    std::copy(nu.begin(), nu.end(), padded.begin());
    total += c * detail::monomial_sym(padded, eigenvalues);
  }
  return total;
}

namespace detail {

// ---------------------------------------------------------------------------
// Per-weight coefficient tables for the full series.
//
// Writing F = sum_k H_k with H_k the weight-k slice of the zonal series,
// the slices satisfy the degree recurrence
//   D[H_k] = a e1 H_{k-1} + sum_i x_i^2 d/dx_i H_{k-1},
// where D = sum_i x_i^2 d^2/dx_i^2 + (b - (m-1)/2) E + V acts diagonally on
// the zonal basis with eigenvalue rho_kappa + k b (E is the Euler operator
// and V the pairwise divided-difference term).  In the monomial basis D is
// triangular with respect to dominance, so each weight is obtained from the
// previous one by a forward substitution over the same box-move lattice as
// the classical single-polynomial recursion.  Coefficients are stored scaled
// by k! / m^(k/2) to keep every weight inside double range.
// ---------------------------------------------------------------------------

constexpr int kMaxVariables = 8;

inline int hyp1f1_weight_cap(int m) {
  switch (m) {
    case 1: return 200000;
    case 2: return 16384;
    case 3: return 4096;
    case 4: return 512;
    default: return 128;
  }
}

// Index of a zero-padded descending exponent vector among the partitions of
// its weight (matching enumerate_padded order), plus iteration support.
class WeightIndexer {
 public:
  WeightIndexer(int k, int m) : k_(k), m_(m) {
    if (m <= 3) {
      if (m == 3) {
        // offset_[w] = number of partitions whose first part exceeds w.
        offset_.assign(k + 2, 0);
        int run = 0;
        for (int w = k; w >= (k + 2) / 3 && w >= 1; --w) {
          offset_[w] = run;
          run += count_first3(w);
        }
        count_ = (k == 0) ? 1 : run;
      } else if (m == 2) {
        count_ = k / 2 + 1;
      } else {
        count_ = 1;
      }
      return;
    }
    enumerate_padded(k, m, [&](const std::vector<int>& buf) {
      lookup_.emplace(pack(buf.data()), static_cast<int>(parts_.size()));
      parts_.push_back(buf);
    });
    count_ = static_cast<int>(parts_.size());
  }

  int count() const { return count_; }

  // `e` must be descending with weight k_ and m_ entries.
  int index(const int* e) const {
    if (m_ == 1) return 0;
    if (m_ == 2) return e[1];
    if (m_ == 3) {
      const int w = e[0];
      return offset_[w] + (std::min(w, k_ - w) - e[1]);
    }
    return lookup_.at(pack(e));
  }

 private:
  int count_first3(int w) const {
    const int r = k_ - w;
    if (r < 0 || r > 2 * w) return 0;
    return std::min(w, r) - (r + 1) / 2 + 1;
  }

  std::uint64_t pack(const int* e) const {
    std::uint64_t key = 0;
    for (int i = 0; i < m_; ++i) key = key * 65521u + static_cast<std::uint64_t>(e[i]);
    return key;
  }

  int k_;
  int m_;
  int count_ = 0;
  std::vector<int> offset_;
  std::vector<std::vector<int>> parts_;
  std::unordered_map<std::uint64_t, int> lookup_;
};

class Hyp1F1Table {
 public:
  Hyp1F1Table(double a, double b, int m)
      : a_(a), b_(b), m_(m), cap_(hyp1f1_weight_cap(m)) {
    blocks_.resize(cap_ + 1);
    blocks_[0] = {1.0};
    prev_.assign(1, 1.0L);
    built_.store(1, std::memory_order_release);
  }

  int variables() const { return m_; }

  // Weights 0..k become readable; throws when k exceeds the in-memory cap.
  void ensure(int k) {
    if (k < built_.load(std::memory_order_acquire)) return;
    std::lock_guard<std::mutex> lock(grow_);
    while (built_.load(std::memory_order_relaxed) <= k) {
      if (built_.load(std::memory_order_relaxed) > cap_) {
        throw std::invalid_argument(
            "hyp1f1_matrix: requested truncation order exceeds the table cap (" +
            std::to_string(cap_) + ") for m=" + std::to_string(m_));
      }
      build_next();
    }
  }

  const std::vector<double>& weight(int k) const { return blocks_[k]; }

 private:
  void build_next() {
    const int k = built_.load(std::memory_order_relaxed);
    const WeightIndexer idx(k, m_);
    const WeightIndexer idx_prev(k - 1, m_);
    std::vector<long double> r(idx.count(), 0.0L);

    const long double step = static_cast<long double>(k) / std::sqrt(static_cast<long double>(m_));

    // Right-hand side (a e1 + sum x^2 d/dx) applied to the previous weight:
    // every monomial of H_{k-1} sends (a + e_s) to each single-slot bump
    // that stays descending.
    {
      int src = 0;
      std::array<int, kMaxVariables> e{};
      enumerate_padded(k - 1, m_, [&](const std::vector<int>& nu) {
        const long double d = prev_[src++];
        if (d != 0.0L) {
          std::copy(nu.begin(), nu.end(), e.begin());
          std::sort(e.begin(), e.begin() + m_);
          do {
            for (int s = 0; s < m_; ++s) {
              e[s] += 1;
              const bool desc = descending(e.data());
              if (desc) {
                r[idx.index(e.data())] += step * (a_ + (e[s] - 1)) * d;
              }
              e[s] -= 1;
            }
          } while (std::next_permutation(e.begin(), e.begin() + m_));
        }
      });
    }

    // Forward substitution down the dominance lattice.  Processing order is
    // descending lex, a linear extension of dominance; every V output of nu
    // lands strictly below nu, on entries not yet solved.
    std::vector<long double> cur(idx.count(), 0.0L);
    {
      int j = 0;
      std::array<int, kMaxVariables> e{};
      std::array<int, kMaxVariables> out{};
      enumerate_padded(k, m_, [&](const std::vector<int>& nu) {
        const long double delta = static_cast<long double>(rho(nu)) +
                                  static_cast<long double>(k) * b_;
        if (std::abs(static_cast<double>(delta)) < 1e-12 * std::max(1.0, k * std::abs(b_))) {
          throw std::domain_error(
              "hyp1f1_matrix: series recurrence pole at weight " + std::to_string(k));
        }
        const long double dj = r[j] / delta;
        cur[j] = dj;
        if (dj != 0.0L) {
          std::copy(nu.begin(), nu.end(), e.begin());
          std::sort(e.begin(), e.begin() + m_);
          do {
            for (int t = 1; t < m_; ++t) {
              for (int s = 0; s < t; ++s) {
                const int p = e[s], q = e[t];
                if (p <= q) continue;
                const int sum = p + q;
                std::copy(e.begin(), e.begin() + m_, out.begin());
                for (int u = q; u <= p; ++u) {
                  out[s] = u;
                  out[t] = sum - u;
                  if (!descending(out.data())) continue;
                  const int target = idx.index(out.data());
                  if (target == j) continue;  // diagonal already in delta
                  const long double w =
                      (u == p || u == q) ? 0.5L * (p - q) : static_cast<long double>(p - q);
                  r[target] -= w * dj;
                }
              }
            }
          } while (std::next_permutation(e.begin(), e.begin() + m_));
        }
        ++j;
      });
    }

    blocks_[k].assign(cur.begin(), cur.end());
    prev_ = std::move(cur);
    built_.store(k + 1, std::memory_order_release);
  }

  bool descending(const int* e) const {
    for (int i = 1; i < m_; ++i) {
      if (e[i] > e[i - 1]) return false;
    }
    return true;
  }

  double a_, b_;
  int m_;
  int cap_;
  std::vector<std::vector<double>> blocks_;
  std::vector<long double> prev_;
  std::mutex grow_;
  std::atomic<int> built_{0};
};

inline std::shared_ptr<Hyp1F1Table> hyp1f1_table(double a, double b, int m) {
  static std::mutex mu;
  static std::map<std::tuple<double, double, int>, std::shared_ptr<Hyp1F1Table>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(a, b, m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto tab = std::make_shared<Hyp1F1Table>(a, b, m);
  cache.emplace(key, tab);
  return tab;
}

// Weight-k slice evaluated at the scaled eigenvalues; pw[i] holds powers of
// the i-th scaled eigenvalue up to exponent k.
inline double weight_slice(const std::vector<double>& coef, int k, int m,
                           const std::vector<std::vector<double>>& pw) {
  const double* c = coef.data();
  double s = 0.0;
  if (m == 1) {
    return c[0];
  }
  if (m == 2) {
    const double* p1 = pw[0].data();
    const double* p2 = pw[1].data();
    for (int j = 0; 2 * j <= k; ++j) {
      const int hi = k - j;
      const double mval = (hi == j) ? p1[j] * p2[j] : p1[hi] * p2[j] + p1[j] * p2[hi];
      s += c[j] * mval;
    }
    return s;
  }
  if (m == 3) {
    const double* p1 = pw[0].data();
    const double* p2 = pw[1].data();
    const double* p3 = pw[2].data();
    for (int w = k; 3 * w >= k && w >= 1; --w) {
      const int r = k - w;
      if (r > 2 * w) continue;
      const int x2hi = std::min(w, r);
      const int x2lo = (r + 1) / 2;
      for (int x2 = x2hi; x2 >= x2lo; --x2) {
        const int x3 = r - x2;
        double mval;
        if (w == x2) {
          mval = (x2 == x3) ? p1[w] * p2[w] * p3[w]
                            : p1[w] * p2[w] * p3[x3] + p1[w] * p2[x3] * p3[w] +
                                  p1[x3] * p2[w] * p3[w];
        } else if (x2 == x3) {
          mval = p1[w] * p2[x2] * p3[x2] + p1[x2] * p2[w] * p3[x2] +
                 p1[x2] * p2[x2] * p3[w];
        } else {
          mval = p1[w] * (p2[x2] * p3[x3] + p2[x3] * p3[x2]) +
                 p1[x2] * (p2[w] * p3[x3] + p2[x3] * p3[w]) +
                 p1[x3] * (p2[w] * p3[x2] + p2[x2] * p3[w]);
        }
        s += (*c++) * mval;
      }
    }
    if (k == 0) s = coef[0];
    return s;
  }
  // General fallback for m >= 4.
  int j = 0;
  std::vector<double> x(m);
  for (int i = 0; i < m; ++i) x[i] = pw[i].size() > 1 ? pw[i][1] : 0.0;
  enumerate_padded(k, m, [&](const std::vector<int>& nu) {
    const double cj = coef[j++];
    if (cj != 0.0) s += cj * monomial_sym(nu, x);
  });
  return s;
}

struct SeriesEval {
  double log_value = 0.0;  // NaN when the truncated sum is nonpositive
  bool converged = true;
  int terms_used = 0;
};

inline SeriesEval hyp1f1_series_log(double a, double b,
                                    std::vector<double> eigenvalues,
                                    const SeriesControl& ctrl) {
  const int m = static_cast<int>(eigenvalues.size());
  if (m < 1) throw std::invalid_argument("hyp1f1_matrix: empty eigenvalue list");
  if (m > kMaxVariables) {
    throw std::invalid_argument("hyp1f1_matrix: at most " +
                                std::to_string(kMaxVariables) + " eigenvalues supported");
  }
  // Pochhammer denominator poles reachable below max_order.
  for (int i = 0; i < m; ++i) {
    const double t = b - 0.5 * i;
    const double rt = std::round(t);
    if (std::abs(t - rt) < 1e-9 && rt <= 0.0 && rt >= -(ctrl.max_order - 1)) {
      throw std::domain_error("hyp1f1_matrix: (b)_kappa vanishes for b=" +
                              std::to_string(b) + " at row " + std::to_string(i + 1));
    }
  }
  // SVD-scale noise must not create spurious partition contributions.
  double lmax = 0.0;
  for (double& x : eigenvalues) {
    if (std::abs(x) < 1e-14) x = 0.0;
    lmax = std::max(lmax, std::abs(x));
  }
  SeriesEval out;
  if (lmax == 0.0) return out;  // only the empty partition contributes

  auto table = hyp1f1_table(a, b, m);
  std::vector<std::vector<double>> pw(m);
  for (int i = 0; i < m; ++i) {
    pw[i] = {1.0, eigenvalues[i] / lmax};
  }

  const double log_m_half = 0.5 * std::log(static_cast<double>(m));
  const double log_lmax = std::log(lmax);

  double acc = 1.0;     // scaled accumulator; true sum = acc * exp(shift)
  double shift = 0.0;
  double prev_contrib = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= ctrl.max_order; ++k) {
    table->ensure(k);
    for (int i = 0; i < m; ++i) pw[i].push_back(pw[i].back() * pw[i][1]);
    const double slice = weight_slice(table->weight(k), k, m, pw);
    const double log_factor = k * (log_m_half + log_lmax) - std::lgamma(k + 1.0);
    const double term = std::exp(log_factor - shift) * slice;
    acc += term;
    out.terms_used = k;
    const double contrib = std::abs(term);
    if (std::max(contrib, prev_contrib) <= ctrl.rel_tol * std::abs(acc)) {
      out.converged = true;
      break;
    }
    prev_contrib = contrib;
    if (k == ctrl.max_order) {
      out.converged = false;
      break;
    }
    if (std::abs(acc) > 1e60) {
      const double d = std::log(std::abs(acc));
      shift += d;
      acc *= std::exp(-d);
      prev_contrib *= std::exp(-d);
    }
  }
  out.log_value = (acc > 0.0) ? shift + std::log(acc)
                              : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace detail

struct Hyp1F1Result {
  double value = 1.0;      // exp(log_value); may overflow to inf
  double log_value = 0.0;  // NaN if the truncated sum is nonpositive
  bool converged = true;
  int terms_used = 0;
};

// Truncated zonal series for 1F1(a; b; S) given the eigenvalues of S.
// Stops once the trailing order contributes at most rel_tol of the
// accumulated sum; `converged` is false when max_order was exhausted first.
inline Hyp1F1Result hyp1f1_matrix(double a, double b,
                                  const std::vector<double>& s_eigenvalues,
                                  const SeriesControl& ctrl = {}) {
  const auto ev = detail::hyp1f1_series_log(a, b, s_eigenvalues, ctrl);
  Hyp1F1Result out;
  out.log_value = ev.log_value;
  out.value = std::exp(ev.log_value);
  out.converged = ev.converged;
  out.terms_used = ev.terms_used;
  return out;
}

// Fused quantity log[ etr(-S) 1F1(a; b; S) ], the combination appearing in
// the marginal formulas; avoids overflow of either factor.
inline Hyp1F1Result hyp1f1_log_scaled(double a, double b,
                                      const std::vector<double>& s_eigenvalues,
                                      const SeriesControl& ctrl = {}) {
  auto out = hyp1f1_matrix(a, b, s_eigenvalues, ctrl);
  double tr = 0.0;
  for (double x : s_eigenvalues) tr += x;
  out.log_value -= tr;
  out.value = std::exp(out.log_value);
  return out;
}

}  // namespace svshrink::zonal
