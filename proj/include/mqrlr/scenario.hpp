#pragma once

// Continuous quantile function built from a discrete fan by linear
// interpolation with linear tail extension to alpha = 0 and 1, plus
// recursive Monte Carlo path generation by inverse-transform sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mqrlr/common.hpp"
#include "mqrlr/csv.hpp"
#include "mqrlr/mqr.hpp"
#include "mqrlr/rng.hpp"

namespace mqrlr {

// Piecewise-linear quantile function with knots covering all of [0,1].
struct ContinuousQF {
  std::vector<double> knot_alpha;  // strictly increasing, 0 first, 1 last
  std::vector<double> knot_value;  // non-decreasing
  bool repaired_crossing = false;

  double operator()(double u) const {
    if (!(u >= 0.0 && u <= 1.0))
      throw std::domain_error("ContinuousQF: probability outside [0,1]");
    const auto it = std::upper_bound(knot_alpha.begin(), knot_alpha.end(), u);
    std::size_t hi = static_cast<std::size_t>(it - knot_alpha.begin());
    if (hi == knot_alpha.size()) return knot_value.back();
    if (hi == 0) return knot_value.front();
    const std::size_t lo = hi - 1;
    const double t = (u - knot_alpha[lo]) / (knot_alpha[hi] - knot_alpha[lo]);
    return knot_value[lo] + t * (knot_value[hi] - knot_value[lo]);
  }
};

// Builds the continuous quantile function from raw (alpha, value) pairs.
// Crossed values are sorted first (rearrangement) and the repair is flagged.
inline ContinuousQF build_qf(const std::vector<double>& alphas,
                             std::vector<double> values) {
  if (alphas.size() < 2)
    throw DataError("build_qf: needs at least two grid points");
  if (values.size() != alphas.size())
    throw DataError("build_qf: alpha/value length mismatch");
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    if (!(alphas[j] > 0.0 && alphas[j] < 1.0))
      throw DataError("build_qf: grid levels must lie in (0,1)");
    if (j > 0 && !(alphas[j - 1] < alphas[j]))
      throw DataError("build_qf: grid levels must increase");
  }
  ContinuousQF qf;
  if (!std::is_sorted(values.begin(), values.end())) {
    std::sort(values.begin(), values.end());
    qf.repaired_crossing = true;
  }
  const std::size_t J = alphas.size();
  const double slope_left = (values[1] - values[0]) / (alphas[1] - alphas[0]);
  const double slope_right =
      (values[J - 1] - values[J - 2]) / (alphas[J - 1] - alphas[J - 2]);
  qf.knot_alpha.reserve(J + 2);
  qf.knot_value.reserve(J + 2);
  qf.knot_alpha.push_back(0.0);
  qf.knot_value.push_back(values[0] - slope_left * alphas[0]);
  for (std::size_t j = 0; j < J; ++j) {
    qf.knot_alpha.push_back(alphas[j]);
    qf.knot_value.push_back(values[j]);
  }
  qf.knot_alpha.push_back(1.0);
  qf.knot_value.push_back(values[J - 1] + slope_right * (1.0 - alphas[J - 1]));
  return qf;
}

inline ContinuousQF build_qf(const QuantileFan& fan) {
  ContinuousQF qf = build_qf(fan.grid.alphas(), fan.values);
  qf.repaired_crossing = qf.repaired_crossing || fan.rearranged;
  return qf;
}

// S x K matrix of simulated future values plus the seed that produced it.
struct ScenarioSet {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  std::vector<double> values;  // row-major: path s, step k at s*n_steps + k
  std::uint64_t seed = 0;
  std::string model_id;
  long crossing_repairs = 0;  // fan rearrangements encountered while sampling

  double at(std::size_t s, std::size_t k) const { return values[s * n_steps + k]; }
};

struct SimulateOptions {
  std::optional<std::pair<double, double>> clamp;  // [lo, hi] for each value
  // Pool the per-path fans into one average fan per step before inverting;
  // default keeps each path conditioned on its own simulated history.
  bool pooled = false;
  std::optional<double> fixed_uniform;  // test hook replacing every draw
};

// Draws S recursive K-step paths. Step 1 shares one covariate row from the
// history; later steps rebuild each path's lag vector from its own values.
inline ScenarioSet sample_paths(const MqrModel& model, const TimeSeries& history,
                                int K, int S, std::uint64_t seed,
                                const SimulateOptions& opts = {}) {
  if (K < 1 || S < 1) throw DataError("sample_paths: K and S must be positive");
  const std::size_t P = model.n_covariates();
  if (P > 0 && model.lags.size() != P)
    throw DataError("sample_paths: model covariates are not pure lags; "
                    "recursive simulation needs lagged covariates");
  int max_lag = 0;
  for (int l : model.lags) max_lag = std::max(max_lag, l);
  const std::size_t H = history.size();
  if (H < static_cast<std::size_t>(max_lag))
    throw DataError("sample_paths: history shorter than the largest lag");
  if (opts.clamp && !(opts.clamp->first < opts.clamp->second))
    throw DataError("sample_paths: clamp bounds must satisfy lo < hi");

  ScenarioSet scen;
  scen.n_paths = static_cast<std::size_t>(S);
  scen.n_steps = static_cast<std::size_t>(K);
  scen.values.assign(scen.n_paths * scen.n_steps, 0.0);
  scen.seed = seed;
  scen.model_id = model.label();

  auto draw = [&](int s, int k) {
    if (opts.fixed_uniform) return *opts.fixed_uniform;
    return RngStream(seed, "path", static_cast<std::uint64_t>(s))
        .uniform(static_cast<std::uint64_t>(k));
  };
  auto clamp_value = [&](double v) {
    if (!opts.clamp) return v;
    return std::min(std::max(v, opts.clamp->first), opts.clamp->second);
  };
  // lag vector for path s at future step k (0-based); time origin is H
  auto lag_row = [&](int s, int k) {
    std::vector<double> x(P);
    for (std::size_t p = 0; p < P; ++p) {
      const long idx = static_cast<long>(H) + k - model.lags[p];
      x[p] = idx < static_cast<long>(H)
                 ? history[static_cast<std::size_t>(idx)]
                 : scen.at(static_cast<std::size_t>(s),
                           static_cast<std::size_t>(idx - static_cast<long>(H)));
    }
    return x;
  };

  // first step: every path shares the same conditional quantile function
  {
    QuantileFan fan = predict_fan(model, lag_row(0, 0));
    if (fan.rearranged) ++scen.crossing_repairs;
    const ContinuousQF qf = build_qf(fan);
    for (int s = 0; s < S; ++s)
      scen.values[static_cast<std::size_t>(s) * scen.n_steps] =
          clamp_value(qf(draw(s, 0)));
  }

  for (int k = 1; k < K; ++k) {
    if (!opts.pooled) {
      for (int s = 0; s < S; ++s) {
        QuantileFan fan = predict_fan(model, lag_row(s, k));
        if (fan.rearranged) ++scen.crossing_repairs;
        const ContinuousQF qf = build_qf(fan);
        scen.values[static_cast<std::size_t>(s) * scen.n_steps + k] =
            clamp_value(qf(draw(s, k)));
      }
    } else {
      // pooled variant: one interpolation from the average of the S fans
      std::vector<double> pooled(model.grid.size(), 0.0);
      for (int s = 0; s < S; ++s) {
        QuantileFan fan = predict_fan(model, lag_row(s, k));
        if (fan.rearranged) ++scen.crossing_repairs;
        for (std::size_t j = 0; j < pooled.size(); ++j)
          pooled[j] += fan.values[j];
      }
      for (double& v : pooled) v /= static_cast<double>(S);
      const ContinuousQF qf = build_qf(model.grid.alphas(), std::move(pooled));
      if (qf.repaired_crossing) ++scen.crossing_repairs;
      for (int s = 0; s < S; ++s)
        scen.values[static_cast<std::size_t>(s) * scen.n_steps + k] =
            clamp_value(qf(draw(s, k)));
    }
  }
  return scen;
}

// Empirical quantiles of one forecast step across paths; linear
// interpolation between order statistics.
inline QuantileFan quantiles_from_paths(const ScenarioSet& scen,
                                        const QuantileGrid& grid, int step) {
  if (step < 1 || static_cast<std::size_t>(step) > scen.n_steps)
    throw DataError("quantiles_from_paths: step out of range");
  std::vector<double> col(scen.n_paths);
  for (std::size_t s = 0; s < scen.n_paths; ++s)
    col[s] = scen.at(s, static_cast<std::size_t>(step - 1));
  std::sort(col.begin(), col.end());
  QuantileFan fan{grid, {}, false};
  fan.values.resize(grid.size());
  const std::size_t S = col.size();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double h = grid.alpha(j) * static_cast<double>(S - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    fan.values[j] =
        lo + 1 < S ? col[lo] + frac * (col[lo + 1] - col[lo]) : col[S - 1];
  }
  return fan;
}

// scenario CSV: scenario_id, step, value
inline void write_scenarios_csv(const std::string& path, const ScenarioSet& scen) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << "scenario_id,step,value\n";
  for (std::size_t s = 0; s < scen.n_paths; ++s)
    for (std::size_t k = 0; k < scen.n_steps; ++k)
      out << s + 1 << ',' << k + 1 << ',' << format_double(scen.at(s, k)) << '\n';
}

// fan CSV: alpha, value, step
inline void write_fans_csv(const std::string& path,
                           const std::vector<QuantileFan>& fans) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << "alpha,value,step\n";
  for (std::size_t k = 0; k < fans.size(); ++k)
    for (std::size_t j = 0; j < fans[k].grid.size(); ++j)
      out << format_double(fans[k].grid.alpha(j)) << ','
          << format_double(fans[k].values[j]) << ',' << k + 1 << '\n';
}

}  // namespace mqrlr
