// Command-line front end: point estimation, risk benchmarks,
// superharmonicity checks, and direct evaluation of the matrix-argument
// hypergeometric series.

#include "svshrink/svshrink.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace svshrink;
using nlohmann::json;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Matrix file format: first line "n m", then n rows of m reals.
Matrix read_matrix_file(const std::string& path, int* n_out, int* m_out) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file: " + path);
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) {
      throw ParseError(path + ":" + std::to_string(lineno + 1) + ": unexpected end of file");
    }
    ++lineno;
    return line;
  };
  std::istringstream header(next_line());
  int n = 0, m = 0;
  if (!(header >> n >> m) || n <= 0 || m <= 0) {
    throw ParseError(path + ":1: expected header 'n m'");
  }
  Matrix x(n, m);
  for (int i = 0; i < n; ++i) {
    std::istringstream row(next_line());
    for (int j = 0; j < m; ++j) {
      if (!(row >> x(i, j))) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": column " +
                         std::to_string(j + 1) + ": expected a real number");
      }
    }
  }
  *n_out = n;
  *m_out = m;
  return x;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

int cmd_estimate(const std::string& input, const std::vector<std::string>& methods,
                 double v1, double v2, int max_order, double rel_tol,
                 const std::string& out_path) {
  int n = 0, m = 0;
  const Matrix x = read_matrix_file(input, &n, &m);
  const ModelSpec spec(n, m, v1, v2);
  const zonal::SeriesControl ctrl(max_order, rel_tol);
  json reports = json::array();
  for (const auto& method : methods) {
    estimators::EstimateReport rep;
    if (method == "mle") {
      rep = estimators::mle(spec, x);
    } else if (method == "js") {
      rep = estimators::james_stein(spec, x, v1);
    } else if (method == "em") {
      rep = estimators::efron_morris(spec, x, v1);
    } else if (method == "em+") {
      rep = estimators::efron_morris(spec, x, v1, true);
    } else if (method == "svs-bayes") {
      rep = estimators::bayes_estimate(priors::PriorKind::svs(), spec, x, v1, ctrl);
    } else if (method == "stein-bayes") {
      rep = estimators::bayes_estimate(priors::PriorKind::stein(), spec, x, v1, ctrl);
    } else {
      throw std::invalid_argument("unknown method: " + method);
    }
    json entry;
    entry["estimator_id"] = rep.estimator_id;
    entry["estimate"] = matrix_to_json(rep.estimate);
    entry["singular_values_input"] = vector_to_json(matnorm::singular_values(x));
    entry["singular_values_estimate"] =
        vector_to_json(matnorm::singular_values(rep.estimate));
    if (rep.series_terms_used) entry["series_terms_used"] = *rep.series_terms_used;
    reports.push_back(std::move(entry));
  }
  write_output(out_path, reports.dump(2) + "\n");
  return 0;
}

int cmd_bench(const std::string& preset, const std::string& experiment_file,
              int replications, std::uint64_t seed, int max_order, double rel_tol,
              int threads, const std::string& out_path) {
  riskbench::RiskExperiment exp;
  if (!experiment_file.empty()) {
    exp = riskbench::experiment_from_json_file(experiment_file);
  } else if (!preset.empty()) {
    if (preset.size() != 4 || preset.rfind("fig", 0) != 0) {
      throw std::invalid_argument("preset must be fig1..fig8");
    }
    exp = riskbench::fig_preset(preset[3] - '0', replications, seed);
  } else {
    throw std::invalid_argument("either --preset or --experiment is required");
  }
  if (replications > 0) exp.replications = replications;
  exp.master_seed = seed;
  if (max_order > 0) exp.ctrl.max_order = max_order;
  if (rel_tol > 0) exp.ctrl.rel_tol = rel_tol;
  if (threads > 0) exp.threads = threads;
  exp.validate();

  const auto samples = riskbench::run_losses(exp);
  const auto table = riskbench::summarize_losses(samples, exp.replications);
  write_output(out_path, table.to_csv());

  // One summary line per method on stdout.
  for (const auto& method : exp.methods) {
    double lo = 1e300, hi = -1e300;
    int flagged = 0;
    for (const auto& row : table.rows) {
      if (row.method != method) continue;
      lo = std::min(lo, row.mean_risk);
      hi = std::max(hi, row.mean_risk);
      if (!row.flags.empty()) ++flagged;
    }
    std::printf("%-12s mean risk range [%.4f, %.4f] over %zu grid points, %d flagged rows\n",
                method.c_str(), lo, hi, exp.grid.size(), flagged);
  }
  return 0;
}

int cmd_check_superharmonic(const std::string& prior, int k_reg, int n, int m,
                            int points, std::uint64_t seed, double h, double radius,
                            int draws) {
  const ModelSpec spec(n, m);
  priors::PriorKind kind = priors::PriorKind::svs();
  if (prior == "svs") {
    kind = priors::PriorKind::svs();
  } else if (prior == "stein") {
    kind = priors::PriorKind::stein();
  } else if (prior == "regularized-svs") {
    kind = priors::PriorKind::regularized_svs(k_reg);
  } else {
    throw std::invalid_argument("prior must be svs|stein|regularized-svs");
  }
  RngStream rng{seed, 0xabcdef};
  auto density = [&](const Matrix& x) {
    return std::exp(priors::log_prior(kind, spec, x));
  };

  int failures = 0;
  int excluded = 0;
  for (int p = 0; p < points; ++p) {
    Matrix x = rng.normal_matrix(n, m);
    const Vector sv = matnorm::singular_values(x);
    if (sv(m - 1) < 1e-6) {
      ++excluded;
      std::printf("point %3d: excluded (near rank deficiency)\n", p);
      continue;
    }
    double lap = 0.0, budget = 0.0;
    try {
      lap = priors::fd_laplacian(density, x, h);
      budget = 1e-3 * priors::fd_second_difference_scale(density, x, h);
    } catch (const std::domain_error& e) {
      ++excluded;
      std::printf("point %3d: excluded (%s)\n", p, e.what());
      continue;
    }
    bool ok = true;
    if (prior == "regularized-svs") {
      ok = lap < 0.0;  // strictly superharmonic everywhere
    } else {
      ok = lap <= budget;  // harmonic away from the singular set
    }
    // Sphere-average superharmonicity check at the given radius.
    const auto sphere = priors::sphere_average_test(density, x, radius, draws, rng);
    const bool sphere_ok =
        sphere.average <= sphere.center_value + 3.0 * sphere.std_error;
    if (!ok || !sphere_ok) ++failures;
    std::printf("point %3d: fd_laplacian % .6e (budget %.2e) sphere avg %.6e vs center %.6e [%s]\n",
                p, lap, budget, sphere.average, sphere.center_value,
                (ok && sphere_ok) ? "ok" : "FAIL");
  }
  // Singular-value coordinate check with analytic partials of the
  // shrinkage prior (its Laplacian vanishes identically at full rank).
  if (prior == "svs") {
    int sv_fail = 0;
    for (int p = 0; p < points; ++p) {
      Vector sigma(m);
      bool distinct = true;
      for (int i = 0; i < m; ++i) sigma(i) = 0.5 + 2.5 * rng.uniform01();
      std::sort(sigma.data(), sigma.data() + m, std::greater<double>());
      for (int i = 0; i + 1 < m; ++i) {
        if (sigma(i) - sigma(i + 1) < 1e-3) distinct = false;
      }
      if (!distinct) continue;
      const double c = spec.n - spec.m - 1.0;
      double val = 1.0;
      for (int i = 0; i < m; ++i) val *= std::pow(sigma(i), -c);
      priors::SvPartials partials;
      partials.first.resize(m);
      partials.second.resize(m);
      for (int i = 0; i < m; ++i) {
        partials.first(i) = -c / sigma(i) * val;
        partials.second(i) = c * (c + 1.0) / (sigma(i) * sigma(i)) * val;
      }
      const double lap = priors::sv_laplacian(sigma, spec, partials);
      if (std::abs(lap) > 1e-8 * (1.0 + std::abs(val))) ++sv_fail;
    }
    std::printf("sv_laplacian(pi_svs) zero at all sampled sigma: %s\n",
                sv_fail == 0 ? "ok" : "FAIL");
    failures += sv_fail;
  }
  std::printf("%d points checked, %d excluded, %d failures\n", points, excluded,
              failures);
  return failures == 0 ? 0 : 1;
}

int cmd_hypergeom(double a, double b, const std::string& eig_csv, int max_order,
                  double rel_tol) {
  std::vector<double> eigs;
  std::istringstream ss(eig_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) eigs.push_back(std::stod(tok));
  }
  if (eigs.empty()) throw std::invalid_argument("--eigs must list eigenvalues");
  const auto r = zonal::hyp1f1_matrix(a, b, eigs, zonal::SeriesControl(max_order, rel_tol));
  std::printf("value %.12g\nlog_value %.12g\nconverged %s\nterms_used %d\n", r.value,
              r.log_value, r.converged ? "true" : "false", r.terms_used);
  return r.converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singular value shrinkage estimation and prediction toolkit"};
  app.require_subcommand(1);

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate the mean matrix from a matrix file");
  std::string est_in, est_out;
  std::vector<std::string> est_methods{"mle"};
  double est_v1 = 1.0, est_v2 = 1.0, est_rel_tol = 1e-12;
  int est_max_order = 60;
  est->add_option("--in", est_in, "input matrix file ('n m' header then rows)")->required();
  est->add_option("--method", est_methods,
                  "methods: mle js em em+ svs-bayes stein-bayes");
  est->add_option("--v1", est_v1, "observation covariance scale");
  est->add_option("--v2", est_v2, "future covariance scale");
  est->add_option("--max-order", est_max_order, "series truncation order");
  est->add_option("--rel-tol", est_rel_tol, "series relative tolerance");
  est->add_option("--out", est_out, "output JSON path (stdout when omitted)");

  // bench
  auto* bench = app.add_subcommand("bench", "Run a Monte Carlo risk benchmark");
  std::string bench_preset, bench_exp, bench_out;
  int bench_reps = 0, bench_max_order = 0, bench_threads = 0;
  double bench_rel_tol = 0.0;
  std::uint64_t bench_seed = 1;
  bench->add_option("--preset", bench_preset, "benchmark preset fig1..fig8");
  bench->add_option("--experiment", bench_exp, "experiment description JSON file");
  bench->add_option("--replications", bench_reps, "Monte Carlo replications");
  bench->add_option("--seed", bench_seed, "master seed");
  bench->add_option("--max-order", bench_max_order, "series truncation order");
  bench->add_option("--rel-tol", bench_rel_tol, "series relative tolerance");
  bench->add_option("--threads", bench_threads, "worker threads");
  bench->add_option("--out", bench_out, "CSV output path (stdout when omitted)");

  // check-superharmonic
  auto* check = app.add_subcommand("check-superharmonic",
                                   "Numerical superharmonicity checks for a prior");
  std::string check_prior = "svs";
  int check_k = 5, check_n = 4, check_m = 2, check_points = 100, check_draws = 2000;
  std::uint64_t check_seed = 1;
  double check_h = 1e-4, check_radius = 0.1;
  check->add_option("--prior", check_prior, "svs|stein|regularized-svs");
  check->add_option("--k", check_k, "regularization index for regularized-svs");
  check->add_option("--n", check_n, "rows");
  check->add_option("--m", check_m, "columns");
  check->add_option("--points", check_points, "number of sample points");
  check->add_option("--seed", check_seed, "seed");
  check->add_option("--step", check_h, "finite-difference step");
  check->add_option("--radius", check_radius, "sphere radius");
  check->add_option("--draws", check_draws, "sphere Monte Carlo draws");

  // hypergeom
  auto* hyp = app.add_subcommand("hypergeom", "Evaluate 1F1 of matrix argument");
  double hyp_a = 1.0, hyp_b = 2.0, hyp_rel_tol = 1e-12;
  std::string hyp_eigs;
  int hyp_max_order = 60;
  hyp->add_option("--a", hyp_a, "numerator parameter")->required();
  hyp->add_option("--b", hyp_b, "denominator parameter")->required();
  hyp->add_option("--eigs", hyp_eigs, "comma-separated eigenvalues")->required();
  hyp->add_option("--max-order", hyp_max_order, "series truncation order");
  hyp->add_option("--rel-tol", hyp_rel_tol, "series relative tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) {
      return cmd_estimate(est_in, est_methods, est_v1, est_v2, est_max_order,
                          est_rel_tol, est_out);
    }
    if (bench->parsed()) {
      return cmd_bench(bench_preset, bench_exp, bench_reps, bench_seed,
                       bench_max_order, bench_rel_tol, bench_threads, bench_out);
    }
    if (check->parsed()) {
      return cmd_check_superharmonic(check_prior, check_k, check_n, check_m,
                                     check_points, check_seed, check_h, check_radius,
                                     check_draws);
    }
    if (hyp->parsed()) {
      return cmd_hypergeom(hyp_a, hyp_b, hyp_eigs, hyp_max_order, hyp_rel_tol);
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const svshrink::ConvergenceError& e) {
    std::fprintf(stderr, "series did not converge: %s (terms used: %d)\n", e.what(),
                 e.terms_used);
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
