#pragma once

// Controlled AR(1) replication study and the rolling-horizon backtest, with
// CSV extracts for the slope-distribution, reliability and summary figures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mqrlr/calibrate.hpp"
#include "mqrlr/common.hpp"
#include "mqrlr/core.hpp"
#include "mqrlr/csv.hpp"
#include "mqrlr/gaussian.hpp"
#include "mqrlr/mqr.hpp"
#include "mqrlr/rng.hpp"
#include "mqrlr/scenario.hpp"
#include "mqrlr/threads.hpp"

namespace mqrlr {

struct Ar1StudyConfig {
  double beta0 = 0.0;
  double beta1 = 0.3;
  double sigma = 1.0;
  int n = 400;
  int replications = 200;
  std::vector<double> gamma_grid = {0.5, 2.0};  // CV candidates for the smoothed fit
  std::uint64_t seed = 1;
  QuantileGrid grid = QuantileGrid::regular19();
  int cv_folds = 5;
  int threads = 1;
  SolveOptions solver;

  void validate() const {
    if (!(std::fabs(beta1) < 1.0))
      throw DataError("Ar1StudyConfig: |beta1| must be below 1 (stationarity)");
    if (n < 50) throw DataError("Ar1StudyConfig: n must be at least 50");
    if (replications < 1) throw DataError("Ar1StudyConfig: needs replications >= 1");
    if (!(sigma >= 0.0)) throw DataError("Ar1StudyConfig: sigma must be nonnegative");
    if (gamma_grid.empty()) throw DataError("Ar1StudyConfig: empty gamma grid");
    if (cv_folds < 2) throw DataError("Ar1StudyConfig: needs at least 2 folds");
  }
};

// One replication of y_t = beta0 + beta1 y_{t-1} + sigma N(0,1), y_0 = 0.
// The same (seed, replication) pair always yields the same series.
inline TimeSeries generate_ar1(const Ar1StudyConfig& cfg, int replication) {
  cfg.validate();
  RngStream rng(cfg.seed, "ar1", static_cast<std::uint64_t>(replication));
  std::vector<double> y(static_cast<std::size_t>(cfg.n));
  double prev = 0.0;
  for (int t = 0; t < cfg.n; ++t) {
    prev = cfg.beta0 + cfg.beta1 * prev + cfg.sigma * rng.normal(static_cast<std::uint64_t>(t));
    y[static_cast<std::size_t>(t)] = prev;
  }
  return TimeSeries(std::move(y));
}

// Population conditional quantile of the Gaussian AR(1).
inline double true_ar1_quantile(double alpha, double x_prev, double beta0,
                                double beta1, double sigma) {
  return beta0 + beta1 * x_prev + sigma * normal_quantile(alpha);
}

struct Ar1SlopeRecord {
  double alpha;
  std::string model;  // MQR-B1 or MQR-LR
  int replication;
  double estimate;  // slope in raw covariate units
};

struct Ar1StudySummary {
  std::vector<double> alphas;
  std::vector<Ar1SlopeRecord> slopes;  // boxplot source
  std::vector<double> median_b1, median_lr;  // per level
  std::vector<double> var_b1, var_lr;        // per level, sample variance
  std::vector<double> chosen_gammas;         // per replication
  int failures = 0;
};

namespace detail {

inline DesignMatrix design_subset(const DesignMatrix& d, std::size_t skip_begin,
                                  std::size_t skip_end) {
  std::vector<double> data;
  std::vector<double> targets;
  const std::size_t P = d.cols();
  for (std::size_t t = 0; t < d.rows(); ++t) {
    if (t >= skip_begin && t < skip_end) continue;
    const auto row = d.row(t);
    data.insert(data.end(), row.begin(), row.end());
    targets.push_back(d.targets()[t]);
  }
  return DesignMatrix(std::move(data), P, std::move(targets), d.covariate_labels());
}

// Out-of-fold pinball loss of theta over contiguous time blocks.
inline double blocked_cv_loss(const DesignMatrix& d, const QuantileGrid& grid,
                              const RegPair& theta, int folds,
                              const SolveOptions& solver) {
  const std::size_t T = d.rows();
  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t lo = T * static_cast<std::size_t>(f) / folds;
    const std::size_t hi = T * static_cast<std::size_t>(f + 1) / folds;
    if (lo == hi) continue;
    MqrModel fit = estimate(design_subset(d, lo, hi), grid, theta, solver);
    for (std::size_t t = lo; t < hi; ++t) {
      const QuantileFan fan = predict_fan(fit, d.row(t));
      for (std::size_t j = 0; j < grid.size(); ++j)
        total += pinball(grid.alpha(j), d.targets()[t] - fan.values[j]);
    }
  }
  return total;
}

inline double sample_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double sample_variance(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / (n - 1.0);
}

}  // namespace detail

// Fits the unregularized and the curvature-regularized model on every
// replication; gamma for the latter comes from blocked cross-validation.
// Slopes are recorded per level in raw units for the boxplot comparison.
inline Ar1StudySummary run_ar1_study(const Ar1StudyConfig& cfg) {
  cfg.validate();
  const std::size_t J = cfg.grid.size();
  const std::size_t R = static_cast<std::size_t>(cfg.replications);

  struct RepResult {
    std::vector<double> slope_b1, slope_lr;
    double gamma = 0.0;
    bool ok = false;
  };
  std::vector<RepResult> results(R);

  parallel_for(R, cfg.threads, [&](std::size_t r) {
    RepResult& res = results[r];
    try {
      const TimeSeries series = generate_ar1(cfg, static_cast<int>(r));
      const DesignMatrix design = build_lag_matrix(series, {1});

      MqrModel b1 = estimate(design, cfg.grid, RegPair{0.0, 0.0}, cfg.solver);

      double best_gamma = cfg.gamma_grid.front();
      if (cfg.gamma_grid.size() > 1) {
        double best_loss = kInf;
        for (double gamma : cfg.gamma_grid) {
          const double loss = detail::blocked_cv_loss(
              design, cfg.grid, RegPair{0.0, gamma}, cfg.cv_folds, cfg.solver);
          if (loss < best_loss) {
            best_loss = loss;
            best_gamma = gamma;
          }
        }
      }
      MqrModel lr = estimate(design, cfg.grid, RegPair{0.0, best_gamma}, cfg.solver);

      res.slope_b1.resize(J);
      res.slope_lr.resize(J);
      for (std::size_t j = 0; j < J; ++j) {
        res.slope_b1[j] = b1.denormalized_coef(0, j);
        res.slope_lr[j] = lr.denormalized_coef(0, j);
      }
      res.gamma = best_gamma;
      res.ok = true;
    } catch (const SolverError&) {
      res.ok = false;
    }
  });

  Ar1StudySummary out;
  out.alphas = cfg.grid.alphas();
  std::vector<std::vector<double>> b1_by_level(J), lr_by_level(J);
  for (std::size_t r = 0; r < R; ++r) {
    if (!results[r].ok) {
      ++out.failures;
      continue;
    }
    out.chosen_gammas.push_back(results[r].gamma);
    for (std::size_t j = 0; j < J; ++j) {
      b1_by_level[j].push_back(results[r].slope_b1[j]);
      lr_by_level[j].push_back(results[r].slope_lr[j]);
      out.slopes.push_back(Ar1SlopeRecord{cfg.grid.alpha(j), "MQR-B1",
                                          static_cast<int>(r),
                                          results[r].slope_b1[j]});
      out.slopes.push_back(Ar1SlopeRecord{cfg.grid.alpha(j), "MQR-LR",
                                          static_cast<int>(r),
                                          results[r].slope_lr[j]});
    }
  }
  if (out.chosen_gammas.empty())
    throw DataError("run_ar1_study: every replication failed");
  for (std::size_t j = 0; j < J; ++j) {
    out.median_b1.push_back(detail::sample_median(b1_by_level[j]));
    out.median_lr.push_back(detail::sample_median(lr_by_level[j]));
    out.var_b1.push_back(b1_by_level[j].size() > 1
                             ? detail::sample_variance(b1_by_level[j])
                             : 0.0);
    out.var_lr.push_back(lr_by_level[j].size() > 1
                             ? detail::sample_variance(lr_by_level[j])
                             : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rolling-horizon backtest

struct BacktestConfig {
  int window_h = 240;
  int n_windows = 100;
  int horizon = 1;  // K
  std::vector<int> lags = {1};
  QuantileGrid grid = QuantileGrid::regular19();
  RegPair theta;
  int n_sim_paths = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  double max_failed_share = 0.05;
  SolveOptions solver;

  void validate() const {
    if (window_h <= max_lag_of(lags) + 1)
      throw DataError("BacktestConfig: window must exceed the largest lag");
    if (n_windows < 1) throw DataError("BacktestConfig: needs n_windows >= 1");
    if (horizon < 1) throw DataError("BacktestConfig: needs horizon >= 1");
    theta.validate();
  }
};

struct BacktestStepRecord {
  int window_index;  // evaluation origin tau
  int step;          // 1..K
  double y_true;
  std::vector<double> fan;
  std::vector<char> flags;  // y_true <= fan value per level
  double pinball_loss;      // summed over levels
};

// Levels whose accuracy the extreme-quantile extract reports.
inline const std::vector<double>& extreme_levels() {
  static const std::vector<double> levels{0.05, 0.10, 0.15, 0.85, 0.90, 0.95};
  return levels;
}

struct BacktestReport {
  QuantileGrid grid;
  RegPair theta;
  int horizon = 1;
  std::vector<BacktestStepRecord> records;  // window-major, step-minor
  std::vector<double> fj;                   // coverage at step K
  double mae = std::numeric_limits<double>::quiet_NaN();
  double extreme_mae = std::numeric_limits<double>::quiet_NaN();
  double sic_first_window = std::numeric_limits<double>::quiet_NaN();
  int windows_used = 0;
  int windows_failed = 0;
};

inline BacktestReport run_backtest(const TimeSeries& series,
                                   const BacktestConfig& cfg) {
  cfg.validate();
  const int max_lag = max_lag_of(cfg.lags);
  const int tau0 = cfg.window_h - 1 + max_lag;
  const int n = static_cast<int>(series.size());
  const int last_needed = tau0 + cfg.n_windows - 1 + cfg.horizon - 1;
  if (last_needed >= n)
    throw DataError("run_backtest: series too short for window x horizon grid (needs " +
                    std::to_string(last_needed + 1) + " points, has " +
                    std::to_string(n) + ")");

  const std::size_t J = cfg.grid.size();
  struct WindowResult {
    std::vector<BacktestStepRecord> steps;
    bool ok = false;
  };
  std::vector<WindowResult> windows(static_cast<std::size_t>(cfg.n_windows));

  parallel_for(windows.size(), cfg.threads, [&](std::size_t w) {
    const int tau = tau0 + static_cast<int>(w);
    WindowResult& res = windows[w];
    try {
      const DesignMatrix design = window_design(series, tau, cfg.window_h, cfg.lags);
      const MqrModel model = estimate(design, cfg.grid, cfg.theta, cfg.solver);

      ScenarioSet scen;
      if (cfg.horizon > 1) {
        const int start = std::max(0, tau - std::max(1, max_lag));
        TimeSeries history(std::vector<double>(series.values().begin() + start,
                                               series.values().begin() + tau));
        scen = sample_paths(model, history, cfg.horizon, cfg.n_sim_paths,
                            mix64(cfg.seed ^ mix64(static_cast<std::uint64_t>(tau))));
      }
      for (int k = 1; k <= cfg.horizon; ++k) {
        QuantileFan fan = k == 1
                              ? predict_fan(model, lag_row_at(series, tau, cfg.lags))
                              : quantiles_from_paths(scen, cfg.grid, k);
        BacktestStepRecord rec;
        rec.window_index = tau;
        rec.step = k;
        rec.y_true = series[static_cast<std::size_t>(tau + k - 1)];
        rec.fan = fan.values;
        rec.flags.resize(J);
        rec.pinball_loss = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
          rec.flags[j] = rec.y_true <= fan.values[j] ? 1 : 0;
          rec.pinball_loss += pinball(cfg.grid.alpha(j), rec.y_true - fan.values[j]);
        }
        res.steps.push_back(std::move(rec));
      }
      res.ok = true;
    } catch (const SolverError&) {
      res.ok = false;
    }
  });

  BacktestReport report{cfg.grid, cfg.theta, cfg.horizon};
  report.fj.assign(J, 0.0);
  for (const WindowResult& res : windows) {
    if (!res.ok) {
      ++report.windows_failed;
      continue;
    }
    ++report.windows_used;
    for (const auto& rec : res.steps) report.records.push_back(rec);
  }
  if (report.windows_used == 0)
    throw DataError("run_backtest: every window failed");
  if (report.windows_failed >
      cfg.max_failed_share * static_cast<double>(cfg.n_windows))
    throw DataError("run_backtest: more than " +
                    std::to_string(static_cast<int>(cfg.max_failed_share * 100)) +
                    "% of windows failed (" + std::to_string(report.windows_failed) +
                    " of " + std::to_string(cfg.n_windows) + ")");

  // coverage at the final step; a plain sum over windows divided once
  for (const auto& rec : report.records) {
    if (rec.step != cfg.horizon) continue;
    for (std::size_t j = 0; j < J; ++j)
      report.fj[j] += static_cast<double>(rec.flags[j]);
  }
  for (double& f : report.fj) f /= static_cast<double>(report.windows_used);
  report.mae = probability_mae(report.fj, cfg.grid);

  double ext_total = 0.0;
  int ext_count = 0;
  for (std::size_t j = 0; j < J; ++j)
    for (double lvl : extreme_levels())
      if (std::fabs(cfg.grid.alpha(j) - lvl) < 1e-9) {
        ext_total += std::fabs(cfg.grid.alpha(j) - report.fj[j]);
        ++ext_count;
      }
  if (ext_count > 0) report.extreme_mae = ext_total / ext_count;

  const DesignMatrix first_design =
      window_design(series, tau0, cfg.window_h, cfg.lags);
  const MqrModel first_fit = estimate(first_design, cfg.grid, cfg.theta, cfg.solver);
  report.sic_first_window = sic(first_fit, first_design);
  return report;
}

// ---------------------------------------------------------------------------
// CSV extracts

// slope-distribution file: alpha, model, replication, estimate
inline void write_slopes_csv(const std::string& path, const Ar1StudySummary& study) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << "alpha,model,replication,estimate\n";
  for (const auto& rec : study.slopes)
    out << format_double(rec.alpha) << ',' << rec.model << ',' << rec.replication
        << ',' << format_double(rec.estimate) << '\n';
}

// backtest file: window, step, y_true, per-level quantiles, per-level flags
inline void write_backtest_csv(const std::string& path, const BacktestReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << "window,step,y_true";
  for (std::size_t j = 0; j < report.grid.size(); ++j)
    out << ",q_" << format_score(report.grid.alpha(j));
  for (std::size_t j = 0; j < report.grid.size(); ++j)
    out << ",flag_" << format_score(report.grid.alpha(j));
  out << '\n';
  for (const auto& rec : report.records) {
    out << rec.window_index << ',' << rec.step << ',' << format_double(rec.y_true);
    for (double q : rec.fan) out << ',' << format_double(q);
    for (char f : rec.flags) out << ',' << static_cast<int>(f);
    out << '\n';
  }
}

// reliability pairs: alpha, empirical_f
inline void write_probprob_csv(const std::string& path, const BacktestReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << "alpha,empirical_f\n";
  for (std::size_t j = 0; j < report.grid.size(); ++j)
    out << format_double(report.grid.alpha(j)) << ','
        << format_double(report.fj[j]) << '\n';
}

// one-line summary in the calibration-table shape
inline void write_backtest_summary_csv(const std::string& path,
                                       const BacktestReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << "model,horizon,lambda,gamma,sic,mae_percent\n";
  out << theta_label(report.theta.lambda, report.theta.gamma) << ','
      << report.horizon << ',' << format_score(report.theta.lambda) << ','
      << format_score(report.theta.gamma) << ','
      << format_score(report.sic_first_window) << ','
      << format_score(report.mae * 100.0) << '\n';
}

}  // namespace mqrlr
