#pragma once

// Joint multi-quantile regression estimated through one linear program:
// pinball loss on every (t, j) cell, adaLASSO penalty on coefficients,
// an L1 penalty on the discrete second derivative of each coefficient path
// across the quantile grid, and non-crossing constraints at every training
// row. Intercepts are never penalized.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mqrlr/common.hpp"
#include "mqrlr/core.hpp"
#include "mqrlr/csv.hpp"
#include "mqrlr/lp.hpp"

namespace mqrlr {

// Regularization pair theta = (lambda, gamma).
struct RegPair {
  double lambda = 0.0;  // adaLASSO strength
  double gamma = 0.0;   // interquantile second-derivative strength

  void validate() const {
    if (!(std::isfinite(lambda) && lambda >= 0.0))
      throw DataError("RegPair: lambda must be finite and nonnegative");
    if (!(std::isfinite(gamma) && gamma >= 0.0))
      throw DataError("RegPair: gamma must be finite and nonnegative");
  }
};

// Discrete second derivative of a coefficient path across quantile levels,
// with arbitrary (not necessarily uniform) spacing.
inline double second_derivative(double beta_prev, double beta_cur, double beta_next,
                                double a_prev, double a_cur, double a_next) {
  if (!(a_prev < a_cur && a_cur < a_next))
    throw std::domain_error("second_derivative: quantile levels must increase");
  const double left = (beta_cur - beta_prev) / (a_cur - a_prev);
  const double right = (beta_next - beta_cur) / (a_next - a_cur);
  return (right - left) / (a_next - a_prev);
}

namespace detail {

// Variable layout of the estimation LP. Order: intercepts, coefficients,
// epsilon+/-, xi+/-, D2+/-.
struct MqrLpLayout {
  int T, P, J;
  int Jp() const { return J - 2; }
  int beta0(int j) const { return j; }
  int beta(int p, int j) const { return J + p * J + j; }
  int eps_pos(int t, int j) const { return J + P * J + t * J + j; }
  int eps_neg(int t, int j) const { return J + P * J + T * J + t * J + j; }
  int xi_pos(int p, int j) const { return J + P * J + 2 * T * J + p * J + j; }
  int xi_neg(int p, int j) const { return J + P * J + 2 * T * J + P * J + p * J + j; }
  int d2_pos(int p, int j) const {
    return J + P * J + 2 * T * J + 2 * P * J + p * Jp() + j;
  }
  int d2_neg(int p, int j) const {
    return J + P * J + 2 * T * J + 2 * P * J + P * Jp() + p * Jp() + j;
  }
  int num_vars() const { return J + P * J + 2 * T * J + 2 * P * J + 2 * P * Jp(); }
};

}  // namespace detail

// Assembles the estimation LP for normalized covariates. `weights` is the
// P x J adaLASSO weight matrix stored p-major; pass all ones for the pilot.
inline StandardLP build_lp(const DesignMatrix& data, const QuantileGrid& grid,
                           const RegPair& theta, const std::vector<double>& weights) {
  theta.validate();
  const int T = static_cast<int>(data.rows());
  const int P = static_cast<int>(data.cols());
  const int J = static_cast<int>(grid.size());
  if (weights.size() != static_cast<std::size_t>(P) * J)
    throw DataError("build_lp: weight matrix must be P x J");
  for (double w : weights)
    if (!(std::isfinite(w) && w > 0.0))
      throw DataError("build_lp: invalid weights (must be strictly positive)");

  const detail::MqrLpLayout L{T, P, J};
  StandardLP lp;
  lp.objective.assign(L.num_vars(), 0.0);
  lp.lower.assign(L.num_vars(), 0.0);
  lp.upper.assign(L.num_vars(), kInf);
  lp.var_labels.assign(L.num_vars(), {});

  auto name = [&](int idx, std::string s) { lp.var_labels[idx] = std::move(s); };
  for (int j = 0; j < J; ++j) {
    lp.lower[L.beta0(j)] = -kInf;
    name(L.beta0(j), "b0_" + std::to_string(j));
  }
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < J; ++j) {
      lp.lower[L.beta(p, j)] = -kInf;
      name(L.beta(p, j), "b_" + std::to_string(p) + "_" + std::to_string(j));
    }
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < J; ++j) {
      lp.objective[L.eps_pos(t, j)] = grid.alpha(j);
      lp.objective[L.eps_neg(t, j)] = 1.0 - grid.alpha(j);
      name(L.eps_pos(t, j), "ep_" + std::to_string(t) + "_" + std::to_string(j));
      name(L.eps_neg(t, j), "en_" + std::to_string(t) + "_" + std::to_string(j));
    }
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < J; ++j) {
      const double c = theta.lambda * weights[p * J + j];
      lp.objective[L.xi_pos(p, j)] = c;
      lp.objective[L.xi_neg(p, j)] = c;
      name(L.xi_pos(p, j), "xp_" + std::to_string(p) + "_" + std::to_string(j));
      name(L.xi_neg(p, j), "xn_" + std::to_string(p) + "_" + std::to_string(j));
    }
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < L.Jp(); ++j) {
      lp.objective[L.d2_pos(p, j)] = theta.gamma;
      lp.objective[L.d2_neg(p, j)] = theta.gamma;
      name(L.d2_pos(p, j), "dp_" + std::to_string(p) + "_" + std::to_string(j));
      name(L.d2_neg(p, j), "dn_" + std::to_string(p) + "_" + std::to_string(j));
    }

  // residual split: eps+ - eps- + b0_j + b_j.x_t = y_t
  for (int t = 0; t < T; ++t) {
    const auto x = data.row(t);
    for (int j = 0; j < J; ++j) {
      LinearRow r;
      r.add(L.eps_pos(t, j), 1.0);
      r.add(L.eps_neg(t, j), -1.0);
      r.add(L.beta0(j), 1.0);
      for (int p = 0; p < P; ++p) r.add(L.beta(p, j), x[p]);
      r.rhs = data.targets()[t];
      lp.eq_rows.push_back(std::move(r));
    }
  }
  // magnitude split: xi+ - xi- = beta_pj
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < J; ++j) {
      LinearRow r;
      r.add(L.xi_pos(p, j), 1.0);
      r.add(L.xi_neg(p, j), -1.0);
      r.add(L.beta(p, j), -1.0);
      r.rhs = 0.0;
      lp.eq_rows.push_back(std::move(r));
    }
  // curvature split: D2+ - D2- = second difference of the coefficient path
  for (int p = 0; p < P; ++p)
    for (int j = 1; j + 1 < J; ++j) {
      const double am = grid.alpha(j - 1), ac = grid.alpha(j), ap = grid.alpha(j + 1);
      const double span = ap - am;
      const double c_prev = 1.0 / ((ac - am) * span);
      const double c_next = 1.0 / ((ap - ac) * span);
      const double c_cur = -(c_prev + c_next);
      LinearRow r;
      r.add(L.d2_pos(p, j - 1), 1.0);
      r.add(L.d2_neg(p, j - 1), -1.0);
      r.add(L.beta(p, j - 1), -c_prev);
      r.add(L.beta(p, j), -c_cur);
      r.add(L.beta(p, j + 1), -c_next);
      r.rhs = 0.0;
      lp.eq_rows.push_back(std::move(r));
    }
  // non-crossing at every training row
  for (int t = 0; t < T; ++t) {
    const auto x = data.row(t);
    for (int j = 1; j < J; ++j) {
      LinearRow r;
      r.add(L.beta0(j - 1), 1.0);
      r.add(L.beta0(j), -1.0);
      for (int p = 0; p < P; ++p) {
        r.add(L.beta(p, j - 1), x[p]);
        r.add(L.beta(p, j), -x[p]);
      }
      r.rhs = 0.0;
      lp.le_rows.push_back(std::move(r));
    }
  }
  return lp;
}

// Fitted multi-quantile model: per-quantile intercepts, the coefficient
// matrix on normalized covariates, and everything needed to score new rows.
struct MqrModel {
  QuantileGrid grid;
  std::vector<double> intercepts;          // J
  std::vector<double> coefs;               // P x J, p-major
  NormStats norm_stats;
  RegPair theta;
  std::vector<std::string> covariate_labels;
  std::vector<double> weights_used;        // P x J; all ones when lambda == 0
  std::vector<int> lags;                   // set when covariates are pure lags

  std::size_t n_covariates() const { return covariate_labels.size(); }
  double coef(std::size_t p, std::size_t j) const { return coefs[p * grid.size() + j]; }
  double weight(std::size_t p, std::size_t j) const {
    return weights_used[p * grid.size() + j];
  }

  // slope in the units of the raw covariate
  double denormalized_coef(std::size_t p, std::size_t j) const {
    return coef(p, j) / norm_stats.sds[p];
  }

  // benchmark naming: both penalties off, adaLASSO only, or the full model
  std::string label() const {
    if (theta.gamma > 0.0) return "MQR-LR";
    if (theta.lambda > 0.0) return "MQR-B2";
    return "MQR-B1";
  }

  double value_at_normalized(std::span<const double> xnorm, std::size_t j) const {
    double v = intercepts[j];
    for (std::size_t p = 0; p < xnorm.size(); ++p) v += coef(p, j) * xnorm[p];
    return v;
  }
};

// Predicted quantile values for one covariate row, one entry per grid level.
struct QuantileFan {
  QuantileGrid grid;
  std::vector<double> values;
  bool rearranged = false;  // out-of-sample crossing was repaired by sorting
};

inline QuantileFan predict_fan(const MqrModel& model, std::span<const double> x_raw) {
  if (x_raw.size() != model.n_covariates())
    throw DataError("predict_fan: covariate dimension mismatch");
  const auto xnorm = apply_norm(x_raw, model.norm_stats);
  QuantileFan fan{model.grid, {}, false};
  fan.values.resize(model.grid.size());
  for (std::size_t j = 0; j < model.grid.size(); ++j)
    fan.values[j] = model.value_at_normalized(xnorm, j);
  if (!std::is_sorted(fan.values.begin(), fan.values.end())) {
    std::sort(fan.values.begin(), fan.values.end());
    fan.rearranged = true;
  }
  return fan;
}

// Objective of the estimation problem evaluated at given coefficients:
// pinball total + lambda-weighted coefficient magnitudes + gamma-weighted
// curvature. Matches the LP objective at its optimum.
inline double mqr_objective(const DesignMatrix& normalized, const QuantileGrid& grid,
                            const RegPair& theta, const std::vector<double>& weights,
                            const std::vector<double>& intercepts,
                            const std::vector<double>& coefs) {
  const std::size_t T = normalized.rows(), P = normalized.cols(), J = grid.size();
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto x = normalized.row(t);
    for (std::size_t j = 0; j < J; ++j) {
      double q = intercepts[j];
      for (std::size_t p = 0; p < P; ++p) q += coefs[p * J + j] * x[p];
      total += pinball(grid.alpha(j), normalized.targets()[t] - q);
    }
  }
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t j = 0; j < J; ++j)
      total += theta.lambda * weights[p * J + j] * std::fabs(coefs[p * J + j]);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t j = 1; j + 1 < J; ++j)
      total += theta.gamma * std::fabs(second_derivative(
                                 coefs[p * J + j - 1], coefs[p * J + j],
                                 coefs[p * J + j + 1], grid.alpha(j - 1),
                                 grid.alpha(j), grid.alpha(j + 1)));
  return total;
}

namespace detail {

inline std::vector<int> lags_from_labels(const std::vector<std::string>& labels) {
  std::vector<int> lags;
  for (const auto& s : labels) {
    if (s.rfind("lag_", 0) != 0) return {};
    char* end = nullptr;
    const long v = std::strtol(s.c_str() + 4, &end, 10);
    if (end == s.c_str() + 4 || *end != '\0' || v <= 0) return {};
    lags.push_back(static_cast<int>(v));
  }
  return lags;
}

struct MqrFit {
  std::vector<double> intercepts;
  std::vector<double> coefs;
  double lp_objective = 0.0;
};

inline MqrFit solve_stage(const DesignMatrix& normalized, const QuantileGrid& grid,
                          const RegPair& theta, const std::vector<double>& weights,
                          const SolveOptions& opts, const char* stage) {
  StandardLP lp = build_lp(normalized, grid, theta, weights);
  LpSolution sol;
  try {
    sol = solve(lp, opts);
  } catch (const SolverError& e) {
    throw SolverError(std::string("estimate: ") + e.what(), e.iterations(), stage);
  }
  if (sol.status != LpStatus::optimal)
    throw SolverError(std::string("estimate: LP came back ") + to_string(sol.status),
                      sol.iterations, stage);
  const int T = static_cast<int>(normalized.rows());
  const int P = static_cast<int>(normalized.cols());
  const int J = static_cast<int>(grid.size());
  const MqrLpLayout L{T, P, J};
  MqrFit fit;
  fit.intercepts.resize(J);
  fit.coefs.resize(static_cast<std::size_t>(P) * J);
  for (int j = 0; j < J; ++j) fit.intercepts[j] = sol.x[L.beta0(j)];
  for (int p = 0; p < P; ++p)
    for (int j = 0; j < J; ++j) fit.coefs[p * J + j] = sol.x[L.beta(p, j)];
  fit.lp_objective = sol.objective_value;
  return fit;
}

}  // namespace detail

// Floor for pilot coefficients when forming adaLASSO weights 1/|beta~|;
// keeps LP costs bounded when the pilot zeroes a coefficient out.
constexpr double kAdaWeightFloor = 1e-4;

// Two-stage estimation: a pilot fit without the adaLASSO term produces the
// weights 1/max(|beta~|, floor), then the weighted problem is solved. With
// lambda == 0 the pilot already is the answer.
inline MqrModel estimate(const DesignMatrix& data, const QuantileGrid& grid,
                         const RegPair& theta, const SolveOptions& opts = {}) {
  theta.validate();
  auto [normalized, stats] = normalize(data);
  const std::size_t P = data.cols(), J = grid.size();

  std::vector<double> ones(P * J, 1.0);
  const RegPair pilot_theta{0.0, theta.gamma};
  detail::MqrFit fit = detail::solve_stage(normalized, grid, pilot_theta, ones,
                                           opts, "pilot");
  std::vector<double> weights = ones;
  if (theta.lambda > 0.0) {
    for (std::size_t k = 0; k < weights.size(); ++k)
      weights[k] = 1.0 / std::max(std::fabs(fit.coefs[k]), kAdaWeightFloor);
    fit = detail::solve_stage(normalized, grid, theta, weights, opts, "final");
  }

  MqrModel model{grid,
                 std::move(fit.intercepts),
                 std::move(fit.coefs),
                 std::move(stats),
                 theta,
                 data.covariate_labels(),
                 std::move(weights),
                 detail::lags_from_labels(data.covariate_labels())};

  // the LP enforces non-crossing at every training row; trust but verify
  for (std::size_t t = 0; t < normalized.rows(); ++t) {
    const auto x = normalized.row(t);
    double prev = model.value_at_normalized(x, 0);
    for (std::size_t j = 1; j < J; ++j) {
      const double cur = model.value_at_normalized(x, j);
      if (cur < prev - 1e-6)
        throw SolverError("estimate: fitted quantiles cross at a training row", 0,
                          "final");
      prev = cur;
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Plain-text model persistence; full precision, bit-exact round trip.

inline void save_model(const MqrModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open model file '" + path + "' for writing");
  const std::size_t P = m.n_covariates(), J = m.grid.size();
  out << "mqrlr-model 1\n";
  out << "label " << m.label() << '\n';
  out << "theta " << format_double(m.theta.lambda) << ' '
      << format_double(m.theta.gamma) << '\n';
  out << "alphas " << J;
  for (std::size_t j = 0; j < J; ++j) out << ' ' << format_double(m.grid.alpha(j));
  out << '\n';
  out << "covariates " << P;
  for (const auto& s : m.covariate_labels) out << ' ' << s;
  out << '\n';
  out << "lags " << m.lags.size();
  for (int l : m.lags) out << ' ' << l;
  out << '\n';
  out << "means " << P;
  for (std::size_t p = 0; p < P; ++p) out << ' ' << format_double(m.norm_stats.means[p]);
  out << '\n';
  out << "sds " << P;
  for (std::size_t p = 0; p < P; ++p) out << ' ' << format_double(m.norm_stats.sds[p]);
  out << '\n';
  out << "intercepts " << J;
  for (std::size_t j = 0; j < J; ++j) out << ' ' << format_double(m.intercepts[j]);
  out << '\n';
  out << "coefs\n";
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t j = 0; j < J; ++j)
      out << (j ? " " : "") << format_double(m.coef(p, j));
    out << '\n';
  }
  out << "weights\n";
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t j = 0; j < J; ++j)
      out << (j ? " " : "") << format_double(m.weight(p, j));
    out << '\n';
  }
  out << "end\n";
}

inline MqrModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::string word;
  auto expect = [&](const char* tag) {
    if (!(in >> word) || word != tag)
      throw DataError("model file '" + path + "': expected '" + tag + "'");
  };
  expect("mqrlr-model");
  int version = 0;
  in >> version;
  if (version != 1) throw DataError("model file '" + path + "': unknown version");
  expect("label");
  in >> word;  // informative only; recomputed from theta
  expect("theta");
  RegPair theta;
  in >> theta.lambda >> theta.gamma;
  expect("alphas");
  std::size_t J = 0;
  in >> J;
  std::vector<double> alphas(J);
  for (auto& a : alphas) in >> a;
  expect("covariates");
  std::size_t P = 0;
  in >> P;
  std::vector<std::string> labels(P);
  for (auto& s : labels) in >> s;
  expect("lags");
  std::size_t L = 0;
  in >> L;
  std::vector<int> lags(L);
  for (auto& l : lags) in >> l;
  expect("means");
  std::size_t np = 0;
  in >> np;
  std::vector<double> means(np);
  for (auto& v : means) in >> v;
  expect("sds");
  in >> np;
  std::vector<double> sds(np);
  for (auto& v : sds) in >> v;
  expect("intercepts");
  std::size_t nj = 0;
  in >> nj;
  std::vector<double> intercepts(nj);
  for (auto& v : intercepts) in >> v;
  expect("coefs");
  std::vector<double> coefs(P * J);
  for (auto& v : coefs) in >> v;
  expect("weights");
  std::vector<double> weights(P * J);
  for (auto& v : weights) in >> v;
  expect("end");
  if (!in) throw DataError("model file '" + path + "': truncated");
  return MqrModel{QuantileGrid(std::move(alphas)),
                  std::move(intercepts),
                  std::move(coefs),
                  NormStats{std::move(means), std::move(sds)},
                  theta,
                  std::move(labels),
                  std::move(weights),
                  std::move(lags)};
}

}  // namespace mqrlr
