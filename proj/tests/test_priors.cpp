#include "svshrink/priors.hpp"
#include "svshrink/matnorm.hpp"

#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace svshrink;
using priors::PriorKind;
using zonal::SeriesControl;

namespace {

Matrix diag_embed(const ModelSpec& spec, std::initializer_list<double> sv) {
  Matrix m = Matrix::Zero(spec.n, spec.m);
  int i = 0;
  for (double s : sv) m(i, i) = s, ++i;
  return m;
}

Matrix random_orthogonal(int d, RngStream& rng) {
  Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(d, d));
  return Matrix(qr.householderQ());
}

double svs_density(const ModelSpec& spec, const Matrix& m) {
  return std::exp(priors::log_prior(PriorKind::svs(), spec, m));
}

}  // namespace

TEST_CASE("log_prior closed forms", "[priors]") {
  const ModelSpec spec(4, 2);
  // SVS with sigma = (2, 1): exponent n-m-1 = 1, log prior = -log 2.
  CHECK(priors::log_prior(PriorKind::svs(), spec, diag_embed(spec, {2.0, 1.0})) ==
        Catch::Approx(-std::log(2.0)).epsilon(1e-12));
  // Stein with ||M||_F = 2 and nm = 8: -6 log 2.
  Matrix m = Matrix::Zero(4, 2);
  m(0, 0) = 2.0;
  CHECK(priors::log_prior(PriorKind::stein(), spec, m) ==
        Catch::Approx(-6.0 * std::log(2.0)).epsilon(1e-12));
  // Uniform is flat.
  CHECK(priors::log_prior(PriorKind::uniform(), spec, m) == 0.0);
}

TEST_CASE("SVS prior with one column is the Stein prior", "[priors]") {
  const ModelSpec spec(5, 1);
  Matrix mu(5, 1);
  mu << 0.4, -0.3, 1.2, 0.1, -0.9;
  const double svs = priors::log_prior(PriorKind::svs(), spec, mu);
  const double stein = priors::log_prior(PriorKind::stein(), spec, mu);
  CHECK(svs == Catch::Approx(stein).epsilon(1e-13));
  CHECK(svs == Catch::Approx(-3.0 * std::log(mu.norm())).epsilon(1e-13));
}

TEST_CASE("prior singularities are in-band infinities", "[priors]") {
  const ModelSpec spec(4, 2);
  const Matrix rank1 = diag_embed(spec, {2.0, 0.0});
  CHECK(std::isinf(priors::log_prior(PriorKind::svs(), spec, rank1)));
  CHECK(std::isinf(priors::log_prior(PriorKind::stein(), spec, Matrix::Zero(4, 2))));
  // The regularized variant is finite everywhere.
  CHECK(std::isfinite(
      priors::log_prior(PriorKind::regularized_svs(7), spec, Matrix::Zero(4, 2))));
}

TEST_CASE("regularized priors increase monotonically to the SVS prior", "[priors]") {
  const ModelSpec spec(4, 2);
  RngStream rng{31, 7};
  for (int t = 0; t < 20; ++t) {
    const Matrix m = rng.normal_matrix(4, 2);
    double prev = -std::numeric_limits<double>::infinity();
    for (int k : {1, 2, 4, 8, 64}) {
      const double lp = priors::log_prior(PriorKind::regularized_svs(k), spec, m);
      CHECK(lp >= prev - 1e-12);
      prev = lp;
    }
    CHECK(prev <= priors::log_prior(PriorKind::svs(), spec, m) + 1e-12);
  }
}

TEST_CASE("transformed prior with identity transform is the SVS prior", "[priors]") {
  const ModelSpec spec(4, 2);
  RngStream rng{3, 3};
  const Matrix m = rng.normal_matrix(4, 2);
  const auto kind = PriorKind::transformed_svs(Matrix::Identity(8, 8));
  CHECK(priors::log_prior(kind, spec, m) ==
        Catch::Approx(priors::log_prior(PriorKind::svs(), spec, m)).epsilon(1e-12));
  CHECK_THROWS_AS(PriorKind::transformed_svs(Matrix::Zero(8, 8)),
                  std::invalid_argument);
}

TEST_CASE("log_marginal_svs at the origin", "[priors]") {
  const ModelSpec spec(4, 2);
  const double lm = priors::log_marginal_svs(spec, Matrix::Zero(4, 2), 1.0);
  CHECK(lm == Catch::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("log_marginal_svs matches the prior-expectation Monte Carlo oracle",
          "[priors][mc]") {
  const ModelSpec spec(4, 2);
  RngStream rng{2718, 28};
  Matrix y(4, 2);
  y << 1.0, 0.2, -0.4, 0.8, 0.3, -0.6, 0.0, 0.5;
  for (double scale : {1.0, 2.0}) {
    const int draws = 300000;
    std::vector<double> vals(draws);
    for (int d = 0; d < draws; ++d) {
      const Matrix m = y + std::sqrt(scale) * rng.normal_matrix(4, 2);
      vals[d] = svs_density(spec, m);
    }
    const auto ms = summarize(vals);
    const double lm = priors::log_marginal_svs(spec, y, scale, SeriesControl(200, 1e-13));
    CHECK(std::abs(std::exp(lm) - ms.mean) <= 3.0 * ms.std_error);
  }
}

TEST_CASE("one-column marginal matches the Stein-prior Monte Carlo oracle",
          "[priors][mc]") {
  const ModelSpec spec(5, 1);
  Matrix y(5, 1);
  y << 1.0, 0.0, 0.0, 0.0, 0.0;
  RngStream rng{1618, 3};
  const int draws = 400000;
  std::vector<double> vals(draws);
  for (int d = 0; d < draws; ++d) {
    const Matrix mu = y + rng.normal_matrix(5, 1);
    vals[d] = std::pow(mu.norm(), -3.0);
  }
  const auto ms = summarize(vals);
  const double lm = priors::log_marginal_svs(spec, y, 1.0, SeriesControl(200, 1e-13));
  CHECK(std::abs(std::exp(lm) - ms.mean) <= 3.0 * ms.std_error);
}

TEST_CASE("marginals stay finite and agree across the m=1 code paths", "[priors]") {
  const ModelSpec spec(5, 1);
  RngStream rng{44, 9};
  for (int t = 0; t < 10; ++t) {
    const Matrix y = 3.0 * rng.normal_matrix(5, 1);
    const double svs = priors::log_marginal_svs(spec, y, 1.3, SeriesControl(300, 1e-13));
    const double stein =
        priors::log_marginal_stein(spec, y, 1.3, SeriesControl(300, 1e-13));
    CHECK(std::isfinite(svs));
    CHECK(svs == Catch::Approx(stein).epsilon(1e-10));
  }
}

TEST_CASE("marginal and prior are orthogonally invariant", "[priors]") {
  const ModelSpec spec(4, 2);
  RngStream rng{55, 2};
  const Matrix y = 2.0 * rng.normal_matrix(4, 2);
  const Matrix p = random_orthogonal(4, rng);
  const Matrix q = random_orthogonal(2, rng);
  const Matrix rotated = p * y * q;
  CHECK(priors::log_prior(PriorKind::svs(), spec, rotated) ==
        Catch::Approx(priors::log_prior(PriorKind::svs(), spec, y)).margin(1e-8));
  const SeriesControl ctrl(200, 1e-13);
  CHECK(priors::log_marginal_svs(spec, rotated, 1.0, ctrl) ==
        Catch::Approx(priors::log_marginal_svs(spec, y, 1.0, ctrl)).margin(1e-8));
}

TEST_CASE("marginal surfaces non-convergence with the order count", "[priors]") {
  const ModelSpec spec(4, 2);
  const Matrix y = diag_embed(spec, {15.0, 3.0});
  try {
    priors::log_marginal_svs(spec, y, 1.0, SeriesControl(12, 1e-12));
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.terms_used == 12);
  }
}

TEST_CASE("gradient of the log marginal vanishes at the origin", "[priors]") {
  const ModelSpec spec(4, 2);
  const Matrix zero = Matrix::Zero(4, 2);
  const Matrix g_svs = priors::grad_log_marginal(PriorKind::svs(), spec, zero, 1.0);
  const Matrix g_stein = priors::grad_log_marginal(PriorKind::stein(), spec, zero, 1.0);
  CHECK(g_svs.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(g_stein.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("SVS gradient matches a common-random-number Monte Carlo oracle",
          "[priors][mc]") {
  // d/dY log m(Y) at two entries, estimated by differencing the
  // prior-expectation form at Y +- eps E with shared Gaussian draws.
  const ModelSpec spec(4, 2);
  const Matrix y = diag_embed(spec, {3.0, 1.0});
  const SeriesControl ctrl(300, 1e-13);
  const Matrix grad = priors::grad_log_marginal(PriorKind::svs(), spec, y, 1.0);
  const double m_at_y = std::exp(priors::log_marginal_svs(spec, y, 1.0, ctrl));

  RngStream rng{8128, 6};
  const double eps = 1e-3;
  const int draws = 400000;
  for (const auto [i, j] : std::vector<std::pair<int, int>>{{0, 0}, {2, 1}}) {
    std::vector<double> diffs(draws);
    Matrix up = y, dn = y;
    up(i, j) += eps;
    dn(i, j) -= eps;
    for (int d = 0; d < draws; ++d) {
      const Matrix g = rng.normal_matrix(4, 2);
      diffs[d] = (svs_density(spec, up + g) - svs_density(spec, dn + g)) / (2.0 * eps);
    }
    const auto ms = summarize(diffs);
    // d log m = (d m) / m.
    CHECK(std::abs(grad(i, j) - ms.mean / m_at_y) <=
          3.0 * ms.std_error / m_at_y + 2e-4);
  }
}

TEST_CASE("Stein gradient matches the analytic scalar derivative", "[priors]") {
  // d/dz log 1F1(1; b; z) = 1F1(2; b+1; z) / (b 1F1(1; b; z)).
  const ModelSpec spec(4, 2);
  RngStream rng{77, 1};
  const Matrix y = 1.5 * rng.normal_matrix(4, 2);
  const double v = 1.0;
  const double b = 0.5 * spec.dim();
  const double z = y.squaredNorm() / (2.0 * v);
  const double ratio =
      oracles::kummer_1f1(2.0, b + 1.0, z) / (b * oracles::kummer_1f1(1.0, b, z));
  const Matrix grad = priors::grad_log_marginal(PriorKind::stein(), spec, y, v);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double analytic = -y(i, j) / v + ratio * y(i, j) / v;
      CHECK(std::abs(grad(i, j) - analytic) < 1e-4);
    }
  }
}

TEST_CASE("fd_laplacian is exact for quadratics", "[priors]") {
  auto f = [](const Matrix& x) { return x.squaredNorm(); };
  RngStream rng{5, 6};
  const Matrix x = rng.normal_matrix(4, 2);
  CHECK(priors::fd_laplacian(f, x, 1e-4) == Catch::Approx(16.0).margin(1e-6));
}

TEST_CASE("SVS density is numerically harmonic at full-rank points", "[priors]") {
  const ModelSpec spec(4, 2);
  RngStream rng{42, 42};
  auto f = [&](const Matrix& x) { return svs_density(spec, x); };
  int tested = 0;
  while (tested < 25) {
    const Matrix x = rng.normal_matrix(4, 2);
    if (matnorm::singular_values(x)(1) < 0.3) continue;
    const double h = 1e-4 * (1.0 + x.norm());
    const double lap = priors::fd_laplacian(f, x, h);
    const double budget = 1e-3 * priors::fd_second_difference_scale(f, x, h);
    CHECK(std::abs(lap) <= budget);
    ++tested;
  }
}

TEST_CASE("regularized SVS densities have strictly negative Laplacian", "[priors]") {
  const ModelSpec spec(4, 2);
  RngStream rng{43, 43};
  auto f = [&](const Matrix& x) {
    return std::exp(priors::log_prior(PriorKind::regularized_svs(10), spec, x));
  };
  for (int t = 0; t < 25; ++t) {
    const Matrix x = rng.normal_matrix(4, 2);
    CHECK(priors::fd_laplacian(f, x, 1e-3) < 0.0);
  }
}

TEST_CASE("SVS density is superharmonic column-wise", "[priors]") {
  const ModelSpec spec(4, 2);
  RngStream rng{44, 44};
  auto f = [&](const Matrix& x) { return svs_density(spec, x); };
  int tested = 0;
  while (tested < 15) {
    const Matrix x = rng.normal_matrix(4, 2);
    if (matnorm::singular_values(x)(1) < 0.3) continue;
    const double h = 1e-4 * (1.0 + x.norm());
    for (int col = 0; col < 2; ++col) {
      const double lap = priors::fd_laplacian_column(f, x, col, h);
      const double budget = 1e-3 * priors::fd_second_difference_scale(f, x, h);
      CHECK(lap <= budget);
    }
    ++tested;
  }
}

TEST_CASE("fd_laplacian rejects singular stencil points", "[priors]") {
  const ModelSpec spec(4, 2);
  auto f = [&](const Matrix& x) { return svs_density(spec, x); };
  const Matrix rank1 = diag_embed(spec, {2.0, 0.0});
  CHECK_THROWS_AS(priors::fd_laplacian(f, rank1, 1e-4), std::domain_error);
}

TEST_CASE("sphere averages never exceed the center value", "[priors][mc]") {
  const ModelSpec spec(4, 2);
  RngStream rng{123, 321};

  auto constant = [](const Matrix&) { return 2.5; };
  const auto flat = priors::sphere_average_test(constant, Matrix::Zero(4, 2), 0.5,
                                                500, rng);
  CHECK(flat.average == Catch::Approx(flat.center_value));

  auto prior_f = [&](const Matrix& x) { return svs_density(spec, x); };
  Matrix center = diag_embed(spec, {2.0, 1.2});
  center(3, 0) = 0.4;
  const auto pr = priors::sphere_average_test(prior_f, center, 0.3, 4000, rng);
  CHECK(pr.average <= pr.center_value + 3.0 * pr.std_error);

  const SeriesControl ctrl(200, 1e-12);
  auto marginal_f = [&](const Matrix& x) {
    return std::exp(priors::log_marginal_svs(spec, x, 1.0, ctrl));
  };
  const auto mg = priors::sphere_average_test(marginal_f, center, 0.8, 2000, rng);
  CHECK(mg.average <= mg.center_value + 3.0 * mg.std_error);
}

TEST_CASE("sv_laplacian annihilates the SVS prior", "[priors]") {
  const ModelSpec spec(4, 2);
  const double c = spec.n - spec.m - 1.0;
  RngStream rng{9, 1};
  for (int t = 0; t < 30; ++t) {
    Vector sigma(2);
    sigma << 1.0 + 2.0 * rng.uniform01(), 0.2 + 0.6 * rng.uniform01();
    double val = std::pow(sigma(0), -c) * std::pow(sigma(1), -c);
    priors::SvPartials partials;
    partials.first.resize(2);
    partials.second.resize(2);
    for (int i = 0; i < 2; ++i) {
      partials.first(i) = -c / sigma(i) * val;
      partials.second(i) = c * (c + 1.0) / (sigma(i) * sigma(i)) * val;
    }
    CHECK(std::abs(priors::sv_laplacian(sigma, spec, partials)) <= 1e-8);
  }
}

TEST_CASE("sv_laplacian of the squared norm matches the ambient value", "[priors]") {
  const ModelSpec spec(4, 2);
  Vector sigma(2);
  sigma << 2.0, 1.0;
  priors::SvPartials partials;
  partials.first.resize(2);
  partials.second.resize(2);
  for (int i = 0; i < 2; ++i) {
    partials.first(i) = 2.0 * sigma(i);
    partials.second(i) = 2.0;
  }
  CHECK(priors::sv_laplacian(sigma, spec, partials) ==
        Catch::Approx(2.0 * spec.dim()).epsilon(1e-12));
}

TEST_CASE("sv_laplacian agrees with the ambient Laplacian on invariant fields",
          "[priors]") {
  const ModelSpec spec(4, 2);
  auto g = [](const Vector& s) {
    return std::exp(0.3 * s(0) - 0.2 * s(1)) + 0.05 * s(0) * s(0) * s(1);
  };
  auto g_partials = [&](const Vector& s) {
    priors::SvPartials p;
    p.first.resize(2);
    p.second.resize(2);
    const double e = std::exp(0.3 * s(0) - 0.2 * s(1));
    p.first(0) = 0.3 * e + 0.1 * s(0) * s(1);
    p.first(1) = -0.2 * e + 0.05 * s(0) * s(0);
    p.second(0) = 0.09 * e + 0.1 * s(1);
    p.second(1) = 0.04 * e;
    return p;
  };
  RngStream rng{64, 32};
  int tested = 0;
  while (tested < 10) {
    const Matrix x = rng.normal_matrix(4, 2) + diag_embed(spec, {2.5, 0.8});
    const Vector sv = matnorm::singular_values(x);
    if (sv(1) < 0.3 || sv(0) - sv(1) < 0.3) continue;
    const double direct = priors::sv_laplacian(sv, spec, g_partials(sv));
    auto field = [&](const Matrix& xx) { return g(matnorm::singular_values(xx)); };
    const double ambient = priors::fd_laplacian(field, x, 1e-4 * (1.0 + x.norm()));
    CHECK(direct == Catch::Approx(ambient).epsilon(1e-3));
    ++tested;
  }
}

TEST_CASE("sv_laplacian rejects degenerate coordinates", "[priors]") {
  const ModelSpec spec(4, 2);
  priors::SvPartials p;
  p.first = Vector::Zero(2);
  p.second = Vector::Zero(2);
  Vector close(2);
  close << 1.0, 1.0 + 1e-8;
  CHECK_THROWS_AS(priors::sv_laplacian(close, spec, p), std::domain_error);
  Vector negative(2);
  negative << 1.0, -0.5;
  CHECK_THROWS_AS(priors::sv_laplacian(negative, spec, p), std::domain_error);
}

TEST_CASE("metric determinant closed forms", "[priors]") {
  const ModelSpec spec41(5, 1);
  Vector s1(1);
  s1 << 1.7;
  CHECK(priors::metric_det(s1, spec41) ==
        Catch::Approx(std::pow(1.7, 8.0)).epsilon(1e-12));

  const ModelSpec spec(4, 2);
  Vector s(2);
  s << 2.0, 1.0;
  CHECK(priors::metric_det(s, spec) == Catch::Approx(144.0).epsilon(1e-12));

  Vector degenerate(2);
  degenerate << 1.5, 1.5;
  CHECK(priors::metric_det(degenerate, spec) == 0.0);
}

TEST_CASE("sv_laplacian is the divergence form built from the metric", "[priors]") {
  // (1/sqrt|g|) sum_i d/ds_i ( sqrt|g| d f/d s_i ) with |g| from metric_det
  // must reproduce the singular-value Laplacian for functions of sigma.
  const ModelSpec spec(5, 3);
  auto f = [](const Vector& s) {
    return std::cos(0.4 * s(0)) + s(1) * s(2) + 0.2 * s(0) * s(0);
  };
  auto f_partials = [&](const Vector& s) {
    priors::SvPartials p;
    p.first.resize(3);
    p.second.resize(3);
    p.first(0) = -0.4 * std::sin(0.4 * s(0)) + 0.4 * s(0);
    p.first(1) = s(2);
    p.first(2) = s(1);
    p.second(0) = -0.16 * std::cos(0.4 * s(0)) + 0.4;
    p.second(1) = 0.0;
    p.second(2) = 0.0;
    return p;
  };
  Vector sigma(3);
  sigma << 2.4, 1.5, 0.7;
  const double direct = priors::sv_laplacian(sigma, spec, f_partials(sigma));

  const double h = 1e-5;
  double divergence = 0.0;
  for (int i = 0; i < 3; ++i) {
    auto flux = [&](double si) {
      Vector s = sigma;
      s(i) = si;
      return std::sqrt(priors::metric_det(s, spec)) * f_partials(s).first(i);
    };
    divergence += (flux(sigma(i) + h) - flux(sigma(i) - h)) / (2.0 * h);
  }
  divergence /= std::sqrt(priors::metric_det(sigma, spec));
  CHECK(direct == Catch::Approx(divergence).epsilon(1e-6));
}
