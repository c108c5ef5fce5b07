#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "mqrlr/common.hpp"
#include "mqrlr/csv.hpp"

namespace mqrlr {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One linear constraint, stored sparsely: sum_i coefs[i] * x[cols[i]].
struct LinearRow {
  std::vector<int> cols;
  std::vector<double> coefs;
  double rhs = 0.0;

  void add(int col, double coef) {
    if (coef == 0.0) return;
    cols.push_back(col);
    coefs.push_back(coef);
  }
};

// A linear program in the canonical shape the builders emit:
//   minimize objective . x
//   subject to eq_rows (a.x = rhs), le_rows (a.x <= rhs), lower <= x <= upper.
struct StandardLP {
  std::vector<double> objective;
  std::vector<LinearRow> eq_rows;
  std::vector<LinearRow> le_rows;
  std::vector<double> lower;  // -inf allowed
  std::vector<double> upper;  // +inf allowed
  std::vector<std::string> var_labels;

  int num_vars() const { return static_cast<int>(objective.size()); }

  int add_var(std::string label, double lo, double hi, double cost) {
    var_labels.push_back(std::move(label));
    lower.push_back(lo);
    upper.push_back(hi);
    objective.push_back(cost);
    return num_vars() - 1;
  }

  void validate() const {
    const std::size_t n = objective.size();
    if (lower.size() != n || upper.size() != n || var_labels.size() != n)
      throw DataError("StandardLP: bound/label arrays do not match objective length");
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(lower[i]) || std::isnan(upper[i]) || !std::isfinite(objective[i]))
        throw DataError("StandardLP: non-finite objective or NaN bound");
      if (lower[i] > upper[i])
        throw DataError("StandardLP: lower bound exceeds upper bound for '" +
                        var_labels[i] + "'");
    }
    auto check_rows = [&](const std::vector<LinearRow>& rows, const char* kind) {
      for (const LinearRow& r : rows) {
        if (r.cols.size() != r.coefs.size())
          throw DataError(std::string("StandardLP: ragged ") + kind + " row");
        if (!std::isfinite(r.rhs)) throw DataError("StandardLP: non-finite rhs");
        for (std::size_t k = 0; k < r.cols.size(); ++k) {
          if (r.cols[k] < 0 || r.cols[k] >= static_cast<int>(n))
            throw DataError("StandardLP: column index out of range");
          if (!std::isfinite(r.coefs[k]))
            throw DataError("StandardLP: non-finite coefficient");
        }
      }
    };
    check_rows(eq_rows, "equality");
    check_rows(le_rows, "inequality");
  }

  // Plain-text dump, one constraint per line. Debug aid behind a CLI flag.
  void dump(std::ostream& os) const {
    auto term = [&](int c, double v) {
      return format_double(v) + "*" + var_labels[c];
    };
    os << "minimize:";
    for (int i = 0; i < num_vars(); ++i)
      if (objective[i] != 0.0) os << ' ' << term(i, objective[i]);
    os << '\n';
    for (const LinearRow& r : eq_rows) {
      os << "eq:";
      for (std::size_t k = 0; k < r.cols.size(); ++k) os << ' ' << term(r.cols[k], r.coefs[k]);
      os << " = " << format_double(r.rhs) << '\n';
    }
    for (const LinearRow& r : le_rows) {
      os << "le:";
      for (std::size_t k = 0; k < r.cols.size(); ++k) os << ' ' << term(r.cols[k], r.coefs[k]);
      os << " <= " << format_double(r.rhs) << '\n';
    }
    for (int i = 0; i < num_vars(); ++i)
      os << "bound: " << format_double(lower[i]) << " <= " << var_labels[i]
         << " <= " << format_double(upper[i]) << '\n';
  }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
  }
  return "?";
}

struct LpSolution {
  LpStatus status = LpStatus::optimal;
  std::vector<double> x;  // populated when optimal
  double objective_value = 0.0;
  long iterations = 0;
};

struct SolveOptions {
  double feas_tol = 1e-7;
  double opt_tol = 1e-9;
  // Dantzig pricing up to dantzig_cap iterations, then Bland's rule until
  // max_iterations; beyond that the solve is reported as stalled. Zero means
  // "pick a cap from the problem size".
  long dantzig_cap = 0;
  long max_iterations = 0;
  enum class Route { automatic, primal, dual } route = Route::automatic;
};

LpSolution solve(const StandardLP& lp, const SolveOptions& opts);

inline LpSolution solve(const StandardLP& lp, double feas_tol = 1e-7,
                        double opt_tol = 1e-9) {
  SolveOptions opts;
  opts.feas_tol = feas_tol;
  opts.opt_tol = opt_tol;
  return solve(lp, opts);
}

}  // namespace mqrlr

#include "mqrlr/simplex.hpp"
