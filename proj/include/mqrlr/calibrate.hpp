#pragma once

// Scoring fitted models and selecting the regularization pair: SIC (log
// pinball loss plus an elbow-set complexity charge) on the training window,
// and probability MAE (gap between nominal levels and realized coverage)
// from a rolling out-of-sample scheme.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mqrlr/common.hpp"
#include "mqrlr/core.hpp"
#include "mqrlr/csv.hpp"
#include "mqrlr/mqr.hpp"
#include "mqrlr/scenario.hpp"
#include "mqrlr/threads.hpp"

namespace mqrlr {

// Elbow residuals are "zero" within this tolerance; exact zeros are not
// attainable in floating point at the solver's feasibility scale.
constexpr double kSicZeroTol = 1e-6;

// SIC evaluated directly on a residual matrix (one vector per level).
// Per level: log of the pinball sum plus log(T) * |elbow_j| / (2T), where
// the elbow collects residuals at zero. Sum over levels. A nonpositive
// pinball sum (perfect interpolation) yields -infinity.
inline double sic_from_residuals(const std::vector<std::vector<double>>& residuals,
                                 const std::vector<double>& alphas,
                                 double zero_tol = kSicZeroTol) {
  if (residuals.size() != alphas.size())
    throw DataError("sic_from_residuals: residual/level count mismatch");
  if (residuals.empty()) throw DataError("sic_from_residuals: no levels");
  const std::size_t T = residuals.front().size();
  double total = 0.0;
  for (std::size_t j = 0; j < residuals.size(); ++j) {
    if (residuals[j].size() != T)
      throw DataError("sic_from_residuals: ragged residual matrix");
    double loss = 0.0;
    std::size_t elbow = 0;
    for (double r : residuals[j]) {
      loss += pinball(alphas[j], r);
      if (std::fabs(r) <= zero_tol) ++elbow;
    }
    if (!(loss > 0.0)) return -std::numeric_limits<double>::infinity();
    total += std::log(loss) + std::log(static_cast<double>(T)) *
                                  static_cast<double>(elbow) /
                                  (2.0 * static_cast<double>(T));
  }
  return total;
}

// SIC of a fitted model on its training sample (raw covariates; the model's
// stored normalization is applied before computing residuals).
inline double sic(const MqrModel& model, const DesignMatrix& data,
                  double zero_tol = kSicZeroTol) {
  if (data.cols() != model.n_covariates())
    throw DataError("sic: covariate dimension mismatch");
  const std::size_t T = data.rows(), J = model.grid.size();
  std::vector<std::vector<double>> residuals(J, std::vector<double>(T));
  for (std::size_t t = 0; t < T; ++t) {
    const auto xnorm = apply_norm(data.row(t), model.norm_stats);
    for (std::size_t j = 0; j < J; ++j)
      residuals[j][t] = data.targets()[t] - model.value_at_normalized(xnorm, j);
  }
  return sic_from_residuals(residuals, model.grid.alphas(), zero_tol);
}

// Mean absolute gap between nominal probabilities and realized frequencies.
inline double probability_mae(std::span<const double> fj,
                              std::span<const double> alphas) {
  if (fj.size() != alphas.size())
    throw DataError("probability_mae: length mismatch");
  if (fj.empty()) throw DataError("probability_mae: empty input");
  double total = 0.0;
  for (std::size_t j = 0; j < fj.size(); ++j) {
    if (!(fj[j] >= 0.0 && fj[j] <= 1.0))
      throw DataError("probability_mae: frequencies must lie in [0,1]");
    total += std::fabs(alphas[j] - fj[j]);
  }
  return total / static_cast<double>(fj.size());
}

inline double probability_mae(const std::vector<double>& fj, const QuantileGrid& grid) {
  return probability_mae(std::span<const double>(fj),
                         std::span<const double>(grid.alphas()));
}

// Shared description of the rolling out-of-sample scheme: fit on the window
// of targets {tau-(H-1), ..., tau-1}, forecast K steps, score at tau+K-1.
struct RollingContext {
  TimeSeries series;
  std::vector<int> lags;
  QuantileGrid grid;
  int window_h = 240;
  std::vector<int> eval_indices;  // tau values, 0-based into series
  int horizon = 1;                // K
  int n_sim_paths = 1000;         // S when horizon > 1
  std::uint64_t seed = 0;
  int threads = 1;
  double max_failed_share = 0.05;
  SolveOptions solver;
};

inline int max_lag_of(const std::vector<int>& lags) {
  int m = 0;
  for (int l : lags) m = std::max(m, l);
  return m;
}

// Training design whose targets are exactly {tau-(H-1), ..., tau-1}.
inline DesignMatrix window_design(const TimeSeries& series, int tau, int window_h,
                                  const std::vector<int>& lags) {
  const int max_lag = max_lag_of(lags);
  const int first_target = tau - (window_h - 1);
  if (first_target - max_lag < 0)
    throw DataError("window_design: series too short for the requested window");
  if (tau > static_cast<int>(series.size()))
    throw DataError("window_design: window end beyond the series");
  const auto& v = series.values();
  std::vector<double> slice(v.begin() + (first_target - max_lag), v.begin() + tau);
  return build_lag_matrix(TimeSeries(std::move(slice)), lags);
}

inline std::vector<double> lag_row_at(const TimeSeries& series, int tau,
                                      const std::vector<int>& lags) {
  std::vector<double> x(lags.size());
  for (std::size_t p = 0; p < lags.size(); ++p) {
    const int idx = tau - lags[p];
    if (idx < 0) throw DataError("lag_row_at: series too short");
    x[p] = series[static_cast<std::size_t>(idx)];
  }
  return x;
}

// K-step-ahead fan for one window: direct evaluation at K=1, simulated
// quantiles otherwise.
inline QuantileFan window_forecast(const MqrModel& model, const TimeSeries& series,
                                   int tau, int horizon, int n_sim_paths,
                                   std::uint64_t seed) {
  if (horizon == 1) return predict_fan(model, lag_row_at(series, tau, model.lags));
  const int max_lag = std::max(1, max_lag_of(model.lags));
  const auto& v = series.values();
  const int start = std::max(0, tau - max_lag);
  TimeSeries history(std::vector<double>(v.begin() + start, v.begin() + tau));
  ScenarioSet scen = sample_paths(model, history, horizon, n_sim_paths, seed);
  return quantiles_from_paths(scen, model.grid, horizon);
}

struct FjEstimate {
  std::vector<double> fj;
  int windows_used = 0;
  int windows_failed = 0;
};

// Realized coverage frequencies over the rolling scheme for a fixed theta.
// A window whose fit fails is dropped from numerator and denominator; more
// than max_failed_share of failures is a hard error.
inline FjEstimate empirical_fj(const RegPair& theta, const RollingContext& ctx) {
  const std::size_t J = ctx.grid.size();
  const int n = static_cast<int>(ctx.series.size());
  for (int tau : ctx.eval_indices)
    if (tau + ctx.horizon - 1 >= n)
      throw DataError("empirical_fj: evaluation index beyond the series end");

  const std::size_t W = ctx.eval_indices.size();
  std::vector<std::vector<double>> flags(W);
  std::vector<char> ok(W, 0);
  parallel_for(W, ctx.threads, [&](std::size_t w) {
    const int tau = ctx.eval_indices[w];
    try {
      DesignMatrix design = window_design(ctx.series, tau, ctx.window_h, ctx.lags);
      MqrModel model = estimate(design, ctx.grid, theta, ctx.solver);
      QuantileFan fan =
          window_forecast(model, ctx.series, tau, ctx.horizon, ctx.n_sim_paths,
                          mix64(ctx.seed ^ mix64(static_cast<std::uint64_t>(tau))));
      const double y = ctx.series[static_cast<std::size_t>(tau + ctx.horizon - 1)];
      std::vector<double> f(J);
      for (std::size_t j = 0; j < J; ++j) f[j] = y <= fan.values[j] ? 1.0 : 0.0;
      flags[w] = std::move(f);
      ok[w] = 1;
    } catch (const SolverError&) {
      ok[w] = 0;  // skipped window, counted below
    }
  });

  FjEstimate out;
  out.fj.assign(J, 0.0);
  for (std::size_t w = 0; w < W; ++w) {
    if (!ok[w]) {
      ++out.windows_failed;
      continue;
    }
    ++out.windows_used;
    for (std::size_t j = 0; j < J; ++j) out.fj[j] += flags[w][j];
  }
  if (out.windows_used == 0)
    throw DataError("empirical_fj: every window failed");
  if (out.windows_failed >
      ctx.max_failed_share * static_cast<double>(W))
    throw DataError("empirical_fj: more than " +
                    std::to_string(static_cast<int>(ctx.max_failed_share * 100)) +
                    "% of windows failed (" + std::to_string(out.windows_failed) +
                    " of " + std::to_string(W) + ")");
  for (double& f : out.fj) f /= static_cast<double>(out.windows_used);
  return out;
}

// ---------------------------------------------------------------------------
// Grid search over theta

struct ThetaGrid {
  std::vector<double> lambdas;
  std::vector<double> gammas;

  void validate() const {
    if (lambdas.empty() || gammas.empty())
      throw DataError("ThetaGrid: lambda and gamma lists must be non-empty");
    auto check = [](const std::vector<double>& v, const char* name) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(std::isfinite(v[i]) && v[i] >= 0.0))
          throw DataError(std::string("ThetaGrid: ") + name +
                          " values must be finite and nonnegative");
        if (i > 0 && !(v[i - 1] < v[i]))
          throw DataError(std::string("ThetaGrid: ") + name +
                          " values must be strictly increasing");
      }
    };
    check(lambdas, "lambda");
    check(gammas, "gamma");
  }
};

enum class CalibMetric { sic, mae };

struct CalibrationCell {
  double lambda = 0.0;
  double gamma = 0.0;
  double sic = std::numeric_limits<double>::quiet_NaN();
  double mae = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> fj;
  int windows_failed = 0;
  bool failed = false;
};

struct CalibrationReport {
  std::vector<CalibrationCell> rows;  // lambda-major, gamma-minor order
  RegPair best_by_sic;
  RegPair best_by_mae;
  RegPair selected;
  CalibMetric metric = CalibMetric::mae;
  int horizon = 1;
};

// Evaluates every (lambda, gamma) cell over the same rolling windows: SIC
// from a fit on the first window's training sample, probability MAE from
// the realized coverage. Both argmins are reported; `metric` picks the
// selected pair. Ties break toward smaller lambda, then smaller gamma.
inline CalibrationReport grid_search(const ThetaGrid& thetas, CalibMetric metric,
                                     const RollingContext& ctx) {
  thetas.validate();
  if (ctx.eval_indices.empty())
    throw DataError("grid_search: no evaluation indices");
  CalibrationReport report;
  report.metric = metric;
  report.horizon = ctx.horizon;
  const std::size_t n_cells = thetas.lambdas.size() * thetas.gammas.size();
  report.rows.resize(n_cells);

  const int tau0 = ctx.eval_indices.front();
  const DesignMatrix sic_design = window_design(ctx.series, tau0, ctx.window_h,
                                                ctx.lags);

  for (std::size_t c = 0; c < n_cells; ++c) {
    // cells run in order; the window loop inside empirical_fj parallelizes
    CalibrationCell& cell = report.rows[c];
    cell.lambda = thetas.lambdas[c / thetas.gammas.size()];
    cell.gamma = thetas.gammas[c % thetas.gammas.size()];
    const RegPair theta{cell.lambda, cell.gamma};
    try {
      MqrModel first_fit = estimate(sic_design, ctx.grid, theta, ctx.solver);
      cell.sic = sic(first_fit, sic_design);
      FjEstimate est = empirical_fj(theta, ctx);
      cell.fj = est.fj;
      cell.windows_failed = est.windows_failed;
      cell.mae = probability_mae(est.fj, ctx.grid);
    } catch (const SolverError&) {
      cell.failed = true;
    } catch (const DataError&) {
      cell.failed = true;
    }
  }

  bool any_ok = false;
  double best_sic = kInf, best_mae = kInf;
  for (const CalibrationCell& cell : report.rows) {
    if (cell.failed) continue;
    any_ok = true;
    if (cell.sic < best_sic) {
      best_sic = cell.sic;
      report.best_by_sic = RegPair{cell.lambda, cell.gamma};
    }
    if (cell.mae < best_mae) {
      best_mae = cell.mae;
      report.best_by_mae = RegPair{cell.lambda, cell.gamma};
    }
  }
  if (!any_ok) throw DataError("grid_search: every cell failed");
  report.selected =
      metric == CalibMetric::sic ? report.best_by_sic : report.best_by_mae;
  return report;
}

// heatmap CSV: lambda, gamma, metric, value — one row per cell per metric;
// MAE is scaled to percent.
inline void write_heatmap_csv(const std::string& path,
                              const CalibrationReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << "lambda,gamma,metric,value\n";
  for (const CalibrationCell& c : report.rows) {
    if (c.failed) continue;
    out << format_double(c.lambda) << ',' << format_double(c.gamma) << ",sic,"
        << format_double(c.sic) << '\n';
    out << format_double(c.lambda) << ',' << format_double(c.gamma) << ",mae,"
        << format_double(c.mae * 100.0) << '\n';
  }
}

inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string theta_label(double lambda, double gamma) {
  if (gamma > 0.0) return "MQR-LR";
  if (lambda > 0.0) return "MQR-B2";
  return "MQR-B1";
}

// calibration report CSV: model, horizon, lambda, gamma, sic, mae_percent
inline void write_calibration_csv(const std::string& path,
                                  const CalibrationReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << "model,horizon,lambda,gamma,sic,mae_percent\n";
  for (const CalibrationCell& c : report.rows) {
    if (c.failed) continue;
    out << theta_label(c.lambda, c.gamma) << ',' << report.horizon << ','
        << format_score(c.lambda) << ',' << format_score(c.gamma) << ','
        << format_score(c.sic) << ',' << format_score(c.mae * 100.0) << '\n';
  }
}

}  // namespace mqrlr
