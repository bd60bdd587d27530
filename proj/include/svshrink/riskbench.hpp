#pragma once

// Monte Carlo risk experiments over grids of singular values, with
// common random numbers across methods, per-replication seeding that is
// independent of execution order, and CSV output.

#include "svshrink/common.hpp"
#include "svshrink/estimators.hpp"
#include "svshrink/predictive.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace svshrink::riskbench {

using zonal::SeriesControl;

struct RiskExperiment {
  enum class Kind { Estimation, Prediction };

  Kind kind = Kind::Estimation;
  ModelSpec spec{4, 2};
  std::map<int, double> fixed_singulars;  // 1-based index -> value
  int swept_index = 1;                    // 1-based
  std::vector<double> grid;
  std::vector<std::string> methods;
  int replications = 10000;
  std::uint64_t master_seed = 1;
  SeriesControl ctrl;
  int threads = 1;
  std::string name;

  void validate() const {
    if (replications < 100) {
      throw std::invalid_argument("RiskExperiment: replications >= 100");
    }
    if (swept_index < 1 || swept_index > spec.m) {
      throw std::invalid_argument("RiskExperiment: swept index in 1..m");
    }
    if (grid.empty()) throw std::invalid_argument("RiskExperiment: empty grid");
    for (double g : grid) {
      if (!(g >= 0.0)) throw std::invalid_argument("RiskExperiment: grid values >= 0");
    }
    for (const auto& [idx, val] : fixed_singulars) {
      if (idx < 1 || idx > spec.m) {
        throw std::invalid_argument("RiskExperiment: fixed singular index in 1..m");
      }
      if (!(val >= 0.0)) throw std::invalid_argument("RiskExperiment: singular values >= 0");
    }
    if (methods.empty()) throw std::invalid_argument("RiskExperiment: no methods");
  }

  Vector singulars_at(double grid_value) const {
    Vector sigma = Vector::Zero(spec.m);
    for (const auto& [idx, val] : fixed_singulars) sigma(idx - 1) = val;
    sigma(swept_index - 1) = grid_value;
    return sigma;
  }
};

// Mean matrix with the given singular values: diag(sigma) embedded in the
// top m x m block (U = I, V = I); risk is invariant to the embedding.
inline Matrix mean_from_singulars(const ModelSpec& spec, const Vector& sigma) {
  if (sigma.size() != spec.m) {
    throw std::invalid_argument("mean_from_singulars: need m singular values");
  }
  for (int i = 0; i < spec.m; ++i) {
    if (!(sigma(i) >= 0.0)) {
      throw std::invalid_argument("mean_from_singulars: singular values >= 0");
    }
  }
  Matrix m = Matrix::Zero(spec.n, spec.m);
  for (int i = 0; i < spec.m; ++i) m(i, i) = sigma(i);
  return m;
}

// Per-replication losses for every grid point and method; NaN marks a
// replication whose series evaluation failed to converge (counted, never
// silently dropped).
struct LossSamples {
  std::vector<double> grid;
  std::vector<std::string> methods;
  std::vector<std::vector<std::vector<double>>> losses;  // [grid][method][rep]
  std::vector<std::vector<int>> failures;                // [grid][method]
};

namespace detail {

inline double estimation_loss(const std::string& method, const ModelSpec& spec,
                              const Matrix& y, const Matrix& truth,
                              const SeriesControl& ctrl) {
  using namespace estimators;
  if (method == "mle") return frobenius_loss(mle(spec, y).estimate, truth);
  if (method == "js") return frobenius_loss(james_stein(spec, y, spec.v1).estimate, truth);
  if (method == "em") return frobenius_loss(efron_morris(spec, y, spec.v1).estimate, truth);
  if (method == "em+") {
    return frobenius_loss(efron_morris(spec, y, spec.v1, true).estimate, truth);
  }
  if (method == "svs-bayes") {
    return frobenius_loss(
        bayes_estimate(priors::PriorKind::svs(), spec, y, spec.v1, ctrl).estimate, truth);
  }
  if (method == "stein-bayes") {
    return frobenius_loss(
        bayes_estimate(priors::PriorKind::stein(), spec, y, spec.v1, ctrl).estimate,
        truth);
  }
  throw std::invalid_argument("unknown estimation method: " + method);
}

inline predictive::PredictiveId prediction_method(const std::string& method) {
  if (method == "uniform") return predictive::PredictiveId::Uniform;
  if (method == "svs") return predictive::PredictiveId::Svs;
  if (method == "stein") return predictive::PredictiveId::Stein;
  throw std::invalid_argument("unknown prediction method: " + method);
}

}  // namespace detail

// Runs the experiment and keeps every per-replication loss.  Replication r
// at grid index g draws from the stream seeded by (master_seed, g, r), so
// methods share draws (common random numbers) and reruns are bit-identical
// no matter how replications are distributed over threads.
inline LossSamples run_losses(const RiskExperiment& exp) {
  exp.validate();
  LossSamples out;
  out.grid = exp.grid;
  out.methods = exp.methods;
  const int n_methods = static_cast<int>(exp.methods.size());
  out.losses.assign(exp.grid.size(),
                    std::vector<std::vector<double>>(
                        n_methods, std::vector<double>(exp.replications, 0.0)));
  out.failures.assign(exp.grid.size(), std::vector<int>(n_methods, 0));

  // Resolve labels before any work.
  for (const auto& method : exp.methods) {
    if (exp.kind == RiskExperiment::Kind::Prediction) {
      detail::prediction_method(method);
    } else if (method != "mle" && method != "js" && method != "em" &&
               method != "em+" && method != "svs-bayes" && method != "stein-bayes") {
      throw std::invalid_argument("unknown estimation method: " + method);
    }
  }

  for (std::size_t g = 0; g < exp.grid.size(); ++g) {
    const Matrix truth = mean_from_singulars(exp.spec, exp.singulars_at(exp.grid[g]));
    auto worker = [&](int r_begin, int r_end) {
      for (int r = r_begin; r < r_end; ++r) {
        RngStream rng = RngStream::for_replication(exp.master_seed,
                                                   static_cast<std::uint64_t>(g),
                                                   static_cast<std::uint64_t>(r));
        if (exp.kind == RiskExperiment::Kind::Estimation) {
          const Matrix y = matnorm::sample(exp.spec, truth, exp.spec.v1, rng);
          for (int mi = 0; mi < n_methods; ++mi) {
            try {
              out.losses[g][mi][r] =
                  detail::estimation_loss(exp.methods[mi], exp.spec, y, truth, exp.ctrl);
            } catch (const ConvergenceError&) {
              out.losses[g][mi][r] = std::numeric_limits<double>::quiet_NaN();
            }
          }
        } else {
          const Matrix y = matnorm::sample(exp.spec, truth, exp.spec.v1, rng);
          const Matrix yf = matnorm::sample(exp.spec, truth, exp.spec.v2, rng);
          const double log_true = matnorm::log_density(exp.spec, yf, truth, exp.spec.v2);
          const predictive::PredictiveQuery q(exp.spec, y, yf);
          for (int mi = 0; mi < n_methods; ++mi) {
            try {
              double log_hat = 0.0;
              switch (detail::prediction_method(exp.methods[mi])) {
                case predictive::PredictiveId::Uniform:
                  log_hat = predictive::log_pred_uniform(q);
                  break;
                case predictive::PredictiveId::Svs:
                  log_hat = predictive::log_pred_svs(q, exp.ctrl);
                  break;
                case predictive::PredictiveId::Stein:
                  log_hat = predictive::log_pred_stein(q, exp.ctrl);
                  break;
              }
              out.losses[g][mi][r] = log_true - log_hat;
            } catch (const ConvergenceError&) {
              out.losses[g][mi][r] = std::numeric_limits<double>::quiet_NaN();
            }
          }
        }
      }
    };
    const int nthreads = std::max(1, exp.threads);
    if (nthreads == 1) {
      worker(0, exp.replications);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (exp.replications + nthreads - 1) / nthreads;
      for (int t = 0; t < nthreads; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(exp.replications, lo + chunk);
        if (lo < hi) pool.emplace_back(worker, lo, hi);
      }
      for (auto& th : pool) th.join();
    }
    for (int mi = 0; mi < n_methods; ++mi) {
      int fails = 0;
      for (double v : out.losses[g][mi]) {
        if (std::isnan(v)) ++fails;
      }
      out.failures[g][mi] = fails;
    }
  }
  return out;
}

struct RiskRow {
  double grid_value = 0.0;
  std::string method;
  double mean_risk = 0.0;
  double std_error = 0.0;
  int replications = 0;
  std::string flags;
};

struct RiskTable {
  std::vector<RiskRow> rows;

  std::string to_csv() const {
    std::string csv = "grid_value,method,mean_risk,std_error,replications,flags\n";
    char buf[256];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%d,%s\n", r.grid_value,
                    r.method.c_str(), r.mean_risk, r.std_error, r.replications,
                    r.flags.c_str());
      csv += buf;
    }
    return csv;
  }
};

inline RiskTable summarize_losses(const LossSamples& samples, int replications) {
  RiskTable table;
  for (std::size_t g = 0; g < samples.grid.size(); ++g) {
    // Row order within a grid value: methods sorted by label.
    std::vector<int> order(samples.methods.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return samples.methods[a] < samples.methods[b];
    });
    for (int mi : order) {
      RiskRow row;
      row.grid_value = samples.grid[g];
      row.method = samples.methods[mi];
      row.replications = replications;
      std::vector<double> ok;
      ok.reserve(samples.losses[g][mi].size());
      for (double v : samples.losses[g][mi]) {
        if (!std::isnan(v)) ok.push_back(v);
      }
      const auto ms = summarize(ok);
      row.mean_risk = ms.mean;
      row.std_error = ms.std_error;
      const int fails = samples.failures[g][mi];
      row.flags = fails > 0 ? "hyp1f1_nonconv:" + std::to_string(fails) : "";
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

inline RiskTable run_estimation_experiment(const RiskExperiment& exp) {
  if (exp.kind != RiskExperiment::Kind::Estimation) {
    throw std::invalid_argument("run_estimation_experiment: wrong experiment kind");
  }
  return summarize_losses(run_losses(exp), exp.replications);
}

inline RiskTable run_prediction_experiment(const RiskExperiment& exp) {
  if (exp.kind != RiskExperiment::Kind::Prediction) {
    throw std::invalid_argument("run_prediction_experiment: wrong experiment kind");
  }
  return summarize_losses(run_losses(exp), exp.replications);
}

// --------------------------------------------------------------------------
// Experiment description files and benchmark presets.
// --------------------------------------------------------------------------

inline RiskExperiment experiment_from_json(const nlohmann::json& j) {
  RiskExperiment exp;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "estimation") {
    exp.kind = RiskExperiment::Kind::Estimation;
  } else if (kind == "prediction") {
    exp.kind = RiskExperiment::Kind::Prediction;
  } else {
    throw std::invalid_argument("experiment kind must be estimation|prediction");
  }
  exp.spec = ModelSpec(j.at("n").get<int>(), j.at("m").get<int>(),
                       j.value("v1", 1.0), j.value("v2", 1.0));
  if (j.contains("fixed_singulars")) {
    for (const auto& [key, val] : j.at("fixed_singulars").items()) {
      exp.fixed_singulars[std::stoi(key)] = val.get<double>();
    }
  }
  exp.swept_index = j.at("swept_index").get<int>();
  exp.grid = j.at("grid").get<std::vector<double>>();
  exp.methods = j.at("methods").get<std::vector<std::string>>();
  exp.replications = j.value("replications", 10000);
  exp.master_seed = j.value("master_seed", std::uint64_t{1});
  exp.ctrl = SeriesControl(j.value("max_order", 60), j.value("rel_tol", 1e-12));
  exp.threads = j.value("threads", 1);
  exp.name = j.value("name", std::string{});
  exp.validate();
  return exp;
}

inline RiskExperiment experiment_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open experiment file: " + path);
  nlohmann::json j;
  in >> j;
  return experiment_from_json(j);
}

// Benchmark presets fig1..fig8: estimation (1-4) and prediction (5-8) risk
// sweeps.  1/5: m=2, n=4, sigma1=20, sweeping sigma2.  2/6: m=2, n=4,
// sigma2=0, sweeping sigma1.  3/7: m=3, n=5, sigma1=5, sigma3=0, sweeping
// sigma2.  4/8: m=3, n=5, sigma2=sigma3=0, sweeping sigma1.  Grids are the
// implementation defaults; max_order is sized so the series converges over
// the whole default grid.
inline RiskExperiment fig_preset(int fig, int replications = 2000,
                                 std::uint64_t master_seed = 1) {
  if (fig < 1 || fig > 8) throw std::invalid_argument("fig_preset: fig in 1..8");
  RiskExperiment exp;
  const bool prediction = fig >= 5;
  const int base = prediction ? fig - 4 : fig;
  exp.kind = prediction ? RiskExperiment::Kind::Prediction
                        : RiskExperiment::Kind::Estimation;
  exp.methods = prediction
                    ? std::vector<std::string>{"uniform", "stein", "svs"}
                    : std::vector<std::string>{"mle", "stein-bayes", "svs-bayes"};
  exp.replications = replications;
  exp.master_seed = master_seed;
  exp.name = "fig" + std::to_string(fig);
  auto steps = [](double lo, double hi, double step) {
    std::vector<double> g;
    for (double v = lo; v <= hi + 1e-9; v += step) g.push_back(v);
    return g;
  };
  switch (base) {
    case 1:
      exp.spec = ModelSpec(4, 2);
      exp.fixed_singulars = {{1, 20.0}};
      exp.swept_index = 2;
      exp.grid = steps(0.0, 20.0, 2.0);
      exp.ctrl = SeriesControl(prediction ? 2048 : 1024, 1e-12);
      break;
    case 2:
      exp.spec = ModelSpec(4, 2);
      exp.fixed_singulars = {{2, 0.0}};
      exp.swept_index = 1;
      exp.grid = steps(0.0, 20.0, 2.0);
      exp.ctrl = SeriesControl(prediction ? 2048 : 1024, 1e-12);
      break;
    case 3:
      exp.spec = ModelSpec(5, 3);
      exp.fixed_singulars = {{1, 5.0}, {3, 0.0}};
      exp.swept_index = 2;
      exp.grid = steps(0.0, 5.0, 1.0);
      exp.ctrl = SeriesControl(1024, 1e-12);
      break;
    case 4:
      exp.spec = ModelSpec(5, 3);
      exp.fixed_singulars = {{2, 0.0}, {3, 0.0}};
      exp.swept_index = 1;
      exp.grid = steps(0.0, 20.0, 2.0);
      exp.ctrl = SeriesControl(prediction ? 2048 : 1024, 1e-12);
      break;
  }
  exp.validate();
  return exp;
}

}  // namespace svshrink::riskbench
