#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mqrlr/common.hpp"

namespace mqrlr {

// Check (pinball) loss: alpha*u for u >= 0, (alpha-1)*u otherwise.
// Nonnegative everywhere, zero only at u = 0, convex in u.
inline double pinball(double alpha, double u) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("pinball: alpha must lie in (0,1)");
  return u >= 0.0 ? alpha * u : (alpha - 1.0) * u;
}

// Ordered observations of the target variable, optionally timestamped.
class TimeSeries {
 public:
  explicit TimeSeries(std::vector<double> values,
                      std::vector<std::string> timestamps = {})
      : values_(std::move(values)), timestamps_(std::move(timestamps)) {
    if (values_.empty()) throw DataError("TimeSeries: needs at least one observation");
    for (double v : values_)
      if (!std::isfinite(v)) throw DataError("TimeSeries: non-finite value");
    if (!timestamps_.empty()) {
      if (timestamps_.size() != values_.size())
        throw DataError("TimeSeries: timestamp/value length mismatch");
      for (std::size_t i = 1; i < timestamps_.size(); ++i)
        if (!(timestamps_[i - 1] < timestamps_[i]))
          throw DataError("TimeSeries: timestamps must be strictly increasing");
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<std::string>& timestamps() const noexcept { return timestamps_; }
  double operator[](std::size_t t) const { return values_[t]; }

 private:
  std::vector<double> values_;
  std::vector<std::string> timestamps_;
};

// Strictly increasing probability levels in (0,1). At least three are
// required so the interior index set of the second-derivative filter is
// nonempty.
class QuantileGrid {
 public:
  explicit QuantileGrid(std::vector<double> alphas) : alphas_(std::move(alphas)) {
    if (alphas_.size() < 3)
      throw DataError("QuantileGrid: needs at least three levels");
    for (double a : alphas_)
      if (!(a > 0.0 && a < 1.0))
        throw DataError("QuantileGrid: levels must lie in (0,1)");
    for (std::size_t j = 1; j < alphas_.size(); ++j)
      if (!(alphas_[j - 1] < alphas_[j]))
        throw DataError("QuantileGrid: levels must be strictly increasing");
  }

  // 0.05, 0.10, ..., 0.95
  static QuantileGrid regular19() {
    std::vector<double> a;
    for (int j = 1; j <= 19; ++j) a.push_back(j / 20.0);
    return QuantileGrid(std::move(a));
  }

  std::size_t size() const noexcept { return alphas_.size(); }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  double alpha(std::size_t j) const { return alphas_[j]; }

  bool operator==(const QuantileGrid& o) const { return alphas_ == o.alphas_; }

 private:
  std::vector<double> alphas_;
};

// Per-time-index covariate rows aligned with their targets.
class DesignMatrix {
 public:
  DesignMatrix(std::vector<double> row_major, std::size_t n_covariates,
               std::vector<double> targets, std::vector<std::string> labels)
      : data_(std::move(row_major)),
        cols_(n_covariates),
        targets_(std::move(targets)),
        labels_(std::move(labels)) {
    if (targets_.empty()) throw DataError("DesignMatrix: no rows");
    if (cols_ == 0 && !data_.empty())
      throw DataError("DesignMatrix: data present but zero covariates");
    if (cols_ > 0 && data_.size() != targets_.size() * cols_)
      throw DataError("DesignMatrix: data size does not match rows x covariates");
    if (labels_.size() != cols_)
      throw DataError("DesignMatrix: label count does not match covariates");
    for (double v : data_)
      if (!std::isfinite(v)) throw DataError("DesignMatrix: non-finite covariate");
    for (double v : targets_)
      if (!std::isfinite(v)) throw DataError("DesignMatrix: non-finite target");
  }

  std::size_t rows() const noexcept { return targets_.size(); }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t t) const {
    return {data_.data() + t * cols_, cols_};
  }
  double at(std::size_t t, std::size_t p) const { return data_[t * cols_ + p]; }
  const std::vector<double>& targets() const noexcept { return targets_; }
  const std::vector<std::string>& covariate_labels() const noexcept { return labels_; }

 private:
  std::vector<double> data_;  // row-major, rows() x cols()
  std::size_t cols_;
  std::vector<double> targets_;
  std::vector<std::string> labels_;
};

// Per-covariate location/scale from the training sample.
struct NormStats {
  std::vector<double> means;
  std::vector<double> sds;  // sample sd, denominator n-1; strictly positive
};

// Lagged design: for each usable t, the row holds y_{t-lag} for each lag in
// the given order, with target y_t. Rows = length - max(lag). An empty lag
// list yields an intercept-only design covering every observation.
inline DesignMatrix build_lag_matrix(const TimeSeries& series,
                                     const std::vector<int>& lags) {
  std::set<int> seen;
  int max_lag = 0;
  for (int lag : lags) {
    if (lag <= 0) throw DataError("build_lag_matrix: lags must be positive");
    if (!seen.insert(lag).second)
      throw DataError("build_lag_matrix: lags must be distinct");
    max_lag = std::max(max_lag, lag);
  }
  const std::size_t n = series.size();
  if (static_cast<std::size_t>(max_lag) >= n)
    throw DataError("build_lag_matrix: series too short for lag " +
                    std::to_string(max_lag));

  const std::size_t rows = n - static_cast<std::size_t>(max_lag);
  std::vector<double> data;
  data.reserve(rows * lags.size());
  std::vector<double> targets;
  targets.reserve(rows);
  for (std::size_t t = static_cast<std::size_t>(max_lag); t < n; ++t) {
    for (int lag : lags) data.push_back(series[t - static_cast<std::size_t>(lag)]);
    targets.push_back(series[t]);
  }
  std::vector<std::string> labels;
  for (int lag : lags) labels.push_back("lag_" + std::to_string(lag));
  return DesignMatrix(std::move(data), lags.size(), std::move(targets),
                      std::move(labels));
}

// Centers and scales every covariate column to mean 0 and sample sd 1.
// Targets are left untouched. Constant columns are rejected by name.
inline std::pair<DesignMatrix, NormStats> normalize(const DesignMatrix& m) {
  const std::size_t T = m.rows(), P = m.cols();
  NormStats stats;
  stats.means.resize(P);
  stats.sds.resize(P);
  for (std::size_t p = 0; p < P; ++p) {
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) sum += m.at(t, p);
    const double mean = sum / static_cast<double>(T);
    double ss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double d = m.at(t, p) - mean;
      ss += d * d;
    }
    const double sd = T > 1 ? std::sqrt(ss / static_cast<double>(T - 1)) : 0.0;
    if (!(sd > 1e-12))
      throw DataError("normalize: degenerate covariate '" + m.covariate_labels()[p] +
                      "' has zero variance");
    stats.means[p] = mean;
    stats.sds[p] = sd;
  }
  std::vector<double> data(T * P);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t p = 0; p < P; ++p)
      data[t * P + p] = (m.at(t, p) - stats.means[p]) / stats.sds[p];
  DesignMatrix out(std::move(data), P, m.targets(), m.covariate_labels());
  return {std::move(out), std::move(stats)};
}

// Applies training-sample statistics to a fresh covariate vector.
inline std::vector<double> apply_norm(std::span<const double> x, const NormStats& stats) {
  if (x.size() != stats.means.size())
    throw DataError("apply_norm: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t p = 0; p < x.size(); ++p)
    out[p] = (x[p] - stats.means[p]) / stats.sds[p];
  return out;
}

}  // namespace mqrlr
