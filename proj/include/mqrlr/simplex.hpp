#pragma once

// Bounded-variable revised simplex with a dense LU basis and product-form
// updates, plus the plumbing that turns a StandardLP into computational form.
//
// Two routes share the same engine:
//  - primal: rows of the LP become the basis dimension. Right for small and
//    generally-shaped problems.
//  - dual: the LP is dualized and every singleton column (epsilon/xi/D2
//    splits, slacks) collapses into a bound on its row's dual variable, so
//    the basis dimension drops to the number of multi-entry columns (the
//    regression coefficients). The optimal primal point is reconstructed
//    from the dual multipliers and certified by a primal-dual gap check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "mqrlr/common.hpp"
#include "mqrlr/lp.hpp"

namespace mqrlr::detail {

// All-equality LP with boxed variables, columns stored sparsely.
struct CompForm {
  int m = 0;                          // rows
  std::vector<int> col_start{0};
  std::vector<int> row_index;
  std::vector<double> value;
  std::vector<double> cost, lo, hi;
  std::vector<double> b;

  int ncols() const { return static_cast<int>(cost.size()); }
  int nnz() const { return static_cast<int>(value.size()); }

  int add_col(double c, double l, double h) {
    cost.push_back(c);
    lo.push_back(l);
    hi.push_back(h);
    col_start.push_back(col_start.back());
    return ncols() - 1;
  }
  // Appends an entry to the most recently added column.
  void add_entry(int row, double v) {
    row_index.push_back(row);
    value.push_back(v);
    ++col_start.back();
  }
};

enum class SimplexOutcome { optimal, infeasible, unbounded, stalled };

class BoundedSimplex {
 public:
  BoundedSimplex(const CompForm& F, const SolveOptions& opts)
      : F_(F), opts_(opts), m_(F.m), n_(F.ncols()) {
    long scale = static_cast<long>(m_) + n_;
    dantzig_cap_ = opts.dantzig_cap > 0 ? opts.dantzig_cap : 20000 + 40 * scale;
    max_iter_ = opts.max_iterations > 0 ? opts.max_iterations : 2 * dantzig_cap_ + 10000;
    // larger bases amortize refactorization over more eta updates, and larger
    // column counts deserve a larger pricing working set
    refactor_every_ = std::clamp(m_, 64, 256);
    n_candidates_ = std::clamp(n_ / 160, 96, 384);
  }

  SimplexOutcome run() {
    init();
    double bscale = 1.0;
    for (double v : F_.b) bscale = std::max(bscale, std::fabs(v));
    double start_infeas = 0.0;
    for (int i = 0; i < m_; ++i)
      if (basic_[i] >= n_) start_infeas += std::max(xB_[i], 0.0);
    if (start_infeas > opts_.feas_tol * bscale) {
      cost_.assign(n_ + m_, 0.0);
      for (int a = 0; a < m_; ++a) cost_[n_ + a] = 1.0;  // phase 1
      reset_price_tol();
      SimplexOutcome out = iterate(true);
      if (out != SimplexOutcome::optimal)
        return out == SimplexOutcome::unbounded ? SimplexOutcome::stalled : out;
      double infeas = 0.0;
      for (int i = 0; i < m_; ++i)
        if (basic_[i] >= n_) infeas += std::max(xB_[i], 0.0);
      if (infeas > opts_.feas_tol * bscale) return SimplexOutcome::infeasible;
    } else {
      cost_.assign(n_ + m_, 0.0);
    }

    // Phase 2: real costs, artificials pinned at zero.
    for (int j = 0; j < n_; ++j) cost_[j] = F_.cost[j];
    for (int a = 0; a < m_; ++a) {
      cost_[n_ + a] = 0.0;
      lo_[n_ + a] = 0.0;
      hi_[n_ + a] = 0.0;
    }
    reset_price_tol();
    return iterate(false);
  }

  long iterations() const { return iter_; }
  long full_passes() const { return n_full_pass_; }
  long bound_flips() const { return n_flips_; }
  long pivots() const { return n_pivots_; }

  std::vector<double> primal_values() {
    refresh();
    std::vector<double> x(n_);
    for (int j = 0; j < n_; ++j) x[j] = xval_[j];
    for (int i = 0; i < m_; ++i)
      if (basic_[i] < n_) x[basic_[i]] = xB_[i];
    return x;
  }

  // Simplex multipliers of the final basis under phase-2 costs.
  std::vector<double> row_multipliers() {
    refresh();
    std::vector<double> pi(m_);
    for (int i = 0; i < m_; ++i) pi[i] = cost_[basic_[i]];
    btran(pi);
    return pi;
  }

  double objective() {
    auto x = primal_values();
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += F_.cost[j] * x[j];
    return obj;
  }

 private:
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kTieTol = 1e-12;

  enum : std::uint8_t { NB_LOWER, NB_UPPER, NB_FREE, BASIC };

  const CompForm& F_;
  SolveOptions opts_;
  int m_, n_;
  long dantzig_cap_ = 0, max_iter_ = 0, iter_ = 0;
  long n_full_pass_ = 0, n_flips_ = 0, n_pivots_ = 0;
  int refactor_every_ = 64;
  int n_candidates_ = 96;

  std::vector<double> cost_, lo_, hi_;   // length n_ + m_ (artificials appended)
  std::vector<double> price_tol_;        // opt_tol scaled by |cost| per column
  std::vector<double> col_scale_;        // 1/sqrt(1+||a_j||^2) pricing weights
  std::vector<std::int8_t> art_sign_;
  std::vector<std::uint8_t> vstat_;
  std::vector<double> xval_;             // nonbasic resting values
  std::vector<int> basic_;               // column per basis slot
  std::vector<int> slot_of_;             // basis slot per column, -1 if nonbasic
  std::vector<double> xB_;

  std::vector<double> lu_;
  std::vector<int> piv_;
  struct Eta {
    int pos;
    std::vector<double> w;
  };
  std::vector<Eta> etas_;

  std::vector<double> wrk_pi_, wrk_w_, wrk_r_;

  int col_nnz(int j) const {
    return j < n_ ? F_.col_start[j + 1] - F_.col_start[j] : 1;
  }
  template <class Fn>
  void for_col(int j, Fn&& fn) const {
    if (j < n_) {
      for (int k = F_.col_start[j]; k < F_.col_start[j + 1]; ++k)
        fn(F_.row_index[k], F_.value[k]);
    } else {
      fn(j - n_, static_cast<double>(art_sign_[j - n_]));
    }
  }

  void init() {
    lo_ = F_.lo;
    hi_ = F_.hi;
    lo_.resize(n_ + m_, 0.0);
    hi_.resize(n_ + m_, kInf);
    xval_.assign(n_ + m_, 0.0);
    vstat_.assign(n_ + m_, NB_LOWER);
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lo_[j])) {
        vstat_[j] = NB_LOWER;
        xval_[j] = lo_[j];
      } else if (std::isfinite(hi_[j])) {
        vstat_[j] = NB_UPPER;
        xval_[j] = hi_[j];
      } else {
        vstat_[j] = NB_FREE;
        xval_[j] = 0.0;
      }
    }
    // Residuals define the artificial start basis.
    std::vector<double> r = F_.b;
    for (int j = 0; j < n_; ++j)
      if (xval_[j] != 0.0)
        for_col(j, [&](int row, double v) { r[row] -= v * xval_[j]; });
    art_sign_.resize(m_);
    basic_.resize(m_);
    xB_.resize(m_);
    slot_of_.assign(n_ + m_, -1);
    for (int i = 0; i < m_; ++i) {
      art_sign_[i] = r[i] >= 0.0 ? 1 : -1;
      basic_[i] = n_ + i;
      slot_of_[n_ + i] = i;
      vstat_[n_ + i] = BASIC;
      xB_[i] = std::fabs(r[i]);
    }
    etas_.clear();
    factorize();
    wrk_pi_.resize(m_);
    wrk_w_.resize(m_);
    wrk_r_.resize(m_);
    iter_ = 0;
  }

  void factorize() {
    etas_.clear();
    lu_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    piv_.resize(m_);
    for (int s = 0; s < m_; ++s)
      for_col(basic_[s], [&](int row, double v) { lu_[static_cast<std::size_t>(row) * m_ + s] = v; });
    for (int k = 0; k < m_; ++k) {
      int p = k;
      double best = std::fabs(lu_[static_cast<std::size_t>(k) * m_ + k]);
      for (int r = k + 1; r < m_; ++r) {
        double v = std::fabs(lu_[static_cast<std::size_t>(r) * m_ + k]);
        if (v > best) {
          best = v;
          p = r;
        }
      }
      if (best < 1e-12) {
        repair_basis(k);
        // restart factorization with the repaired basis
        lu_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
        for (int s = 0; s < m_; ++s)
          for_col(basic_[s], [&](int row, double v) { lu_[static_cast<std::size_t>(row) * m_ + s] = v; });
        k = -1;
        continue;
      }
      piv_[k] = p;
      if (p != k)
        for (int c = 0; c < m_; ++c)
          std::swap(lu_[static_cast<std::size_t>(k) * m_ + c], lu_[static_cast<std::size_t>(p) * m_ + c]);
      const double d = lu_[static_cast<std::size_t>(k) * m_ + k];
      for (int r = k + 1; r < m_; ++r) {
        double& l = lu_[static_cast<std::size_t>(r) * m_ + k];
        if (l == 0.0) continue;
        l /= d;
        const double lv = l;
        const double* uk = &lu_[static_cast<std::size_t>(k) * m_];
        double* ur = &lu_[static_cast<std::size_t>(r) * m_];
        for (int c = k + 1; c < m_; ++c) ur[c] -= lv * uk[c];
      }
    }
  }

  // A dependent basis column is swapped for the artificial of the first row
  // that has no pivot yet; the displaced variable goes to a resting bound.
  void repair_basis(int slot) {
    int out_col = basic_[slot];
    slot_of_[out_col] = -1;
    if (out_col < n_) {
      if (std::isfinite(lo_[out_col])) {
        vstat_[out_col] = NB_LOWER;
        xval_[out_col] = lo_[out_col];
      } else if (std::isfinite(hi_[out_col])) {
        vstat_[out_col] = NB_UPPER;
        xval_[out_col] = hi_[out_col];
      } else {
        vstat_[out_col] = NB_FREE;
        xval_[out_col] = 0.0;
      }
    } else {
      vstat_[out_col] = NB_LOWER;
      xval_[out_col] = 0.0;
    }
    // take the artificial whose row index equals a row not yet represented;
    // using the slot index keeps the choice deterministic.
    int art = n_ + slot;
    if (slot_of_[art] >= 0) {
      for (int a = 0; a < m_; ++a)
        if (slot_of_[n_ + a] < 0) {
          art = n_ + a;
          break;
        }
    }
    basic_[slot] = art;
    slot_of_[art] = slot;
    vstat_[art] = BASIC;
  }

  void lu_solve(std::vector<double>& v) const {
    for (int k = 0; k < m_; ++k)
      if (piv_[k] != k) std::swap(v[k], v[piv_[k]]);
    for (int r = 1; r < m_; ++r) {
      const double* row = &lu_[static_cast<std::size_t>(r) * m_];
      double acc = v[r];
      for (int c = 0; c < r; ++c) acc -= row[c] * v[c];
      v[r] = acc;
    }
    for (int r = m_ - 1; r >= 0; --r) {
      const double* row = &lu_[static_cast<std::size_t>(r) * m_];
      double acc = v[r];
      for (int c = r + 1; c < m_; ++c) acc -= row[c] * v[c];
      v[r] = acc / row[r];
    }
  }

  void lu_solve_t(std::vector<double>& v) const {
    // Solve U^T z = v (U^T is lower triangular), then L^T w = z, then undo P.
    for (int r = 0; r < m_; ++r) {
      double acc = v[r];
      for (int c = 0; c < r; ++c) acc -= lu_[static_cast<std::size_t>(c) * m_ + r] * v[c];
      v[r] = acc / lu_[static_cast<std::size_t>(r) * m_ + r];
    }
    for (int r = m_ - 1; r >= 0; --r) {
      double acc = v[r];
      for (int c = r + 1; c < m_; ++c) acc -= lu_[static_cast<std::size_t>(c) * m_ + r] * v[c];
      v[r] = acc;
    }
    for (int k = m_ - 1; k >= 0; --k)
      if (piv_[k] != k) std::swap(v[k], v[piv_[k]]);
  }

  void ftran(std::vector<double>& v) const {
    lu_solve(v);
    for (const Eta& e : etas_) {
      const double vp = v[e.pos] / e.w[e.pos];
      v[e.pos] = vp;
      if (vp != 0.0)
        for (int i = 0; i < m_; ++i)
          if (i != e.pos) v[i] -= e.w[i] * vp;
    }
  }

  void btran(std::vector<double>& v) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double acc = v[it->pos];
      const std::vector<double>& w = it->w;
      for (int i = 0; i < m_; ++i)
        if (i != it->pos) acc -= w[i] * v[i];
      v[it->pos] = acc / w[it->pos];
    }
    lu_solve_t(v);
  }

  void recompute_xB() {
    wrk_r_ = F_.b;
    for (int j = 0; j < n_ + m_; ++j)
      if (vstat_[j] != BASIC && xval_[j] != 0.0)
        for_col(j, [&](int row, double v) { wrk_r_[row] -= v * xval_[j]; });
    lu_solve(wrk_r_);
    for (const Eta& e : etas_) {
      const double vp = wrk_r_[e.pos] / e.w[e.pos];
      wrk_r_[e.pos] = vp;
      if (vp != 0.0)
        for (int i = 0; i < m_; ++i)
          if (i != e.pos) wrk_r_[i] -= e.w[i] * vp;
    }
    xB_ = wrk_r_;
  }

  void refresh() {
    factorize();
    recompute_xB();
  }

  // Reduced cost of one column given current multipliers.
  double reduced_cost(int j) const {
    double d = cost_[j];
    if (j < n_) {
      const int* ri = F_.row_index.data();
      const double* vv = F_.value.data();
      for (int k = F_.col_start[j]; k < F_.col_start[j + 1]; ++k)
        d -= vv[k] * wrk_pi_[ri[k]];
    } else {
      d -= static_cast<double>(art_sign_[j - n_]) * wrk_pi_[j - n_];
    }
    return d;
  }

  void reset_price_tol() {
    price_tol_.resize(n_ + m_);
    for (int j = 0; j < n_ + m_; ++j)
      price_tol_[j] = opts_.opt_tol * std::max(1.0, std::fabs(cost_[j]));
    if (col_scale_.empty()) {
      col_scale_.assign(n_ + m_, 1.0);
      for (int j = 0; j < n_ + m_; ++j) {
        double ss = 0.0;
        for_col(j, [&](int, double v) { ss += v * v; });
        col_scale_[j] = 1.0 / std::sqrt(1.0 + ss);
      }
    }
  }

  // Improving direction for column j under reduced cost d; 0 when none.
  int improving_dir(int j, double d) const {
    const std::uint8_t st = vstat_[j];
    if (st == BASIC || lo_[j] == hi_[j]) return 0;
    const double tol = price_tol_[j];
    if ((st == NB_LOWER || st == NB_FREE) && d < -tol) return 1;
    if ((st == NB_UPPER || st == NB_FREE) && d > tol) return -1;
    return 0;
  }

  SimplexOutcome iterate(bool phase1) {
    (void)phase1;
    const int kCandidates = n_candidates_;
    std::vector<int> cand;
    cand.reserve(kCandidates);
    bool need_full_pass = true;
    bool pi_fresh = false;  // multipliers survive bound flips (basis unchanged)

    while (true) {
      if (iter_ >= max_iter_) return SimplexOutcome::stalled;
      const bool bland = iter_ > dantzig_cap_;
      ++iter_;

      if (!pi_fresh) {
        for (int i = 0; i < m_; ++i) wrk_pi_[i] = cost_[basic_[i]];
        btran(wrk_pi_);
        pi_fresh = true;
      }

      int enter = -1, dir = 0;
      if (bland) {
        for (int j = 0; j < n_ + m_; ++j) {
          const int cd = improving_dir(j, reduced_cost(j));
          if (cd != 0) {
            enter = j;
            dir = cd;
            break;
          }
        }
        if (enter < 0) return SimplexOutcome::optimal;
      } else {
        if (!need_full_pass) {
          // minor step: price the working set only
          double best_score = 0.0;
          for (int j : cand) {
            const double d = reduced_cost(j);
            const int cd = improving_dir(j, d);
            if (cd == 0) continue;
            const double score = std::fabs(d) * col_scale_[j];
            if (score > best_score + kTieTol) {
              best_score = score;
              enter = j;
              dir = cd;
            }
          }
          if (enter < 0) need_full_pass = true;
        }
        if (need_full_pass && enter < 0) {
          // major step: full pricing pass collects the next working set
          ++n_full_pass_;
          cand.clear();
          std::vector<std::pair<double, int>> top;  // (score, col)
          top.reserve(kCandidates + 1);
          for (int j = 0; j < n_ + m_; ++j) {
            const double d = reduced_cost(j);
            const int cd = improving_dir(j, d);
            if (cd == 0) continue;
            const double score = std::fabs(d) * col_scale_[j];
            if (static_cast<int>(top.size()) < kCandidates) {
              top.emplace_back(score, j);
              if (static_cast<int>(top.size()) == kCandidates)
                std::sort(top.begin(), top.end(),
                          [](const auto& a, const auto& b) {
                            return a.first > b.first ||
                                   (a.first == b.first && a.second < b.second);
                          });
            } else if (score > top.back().first) {
              top.back() = {score, j};
              for (std::size_t q = top.size() - 1;
                   q > 0 && (top[q].first > top[q - 1].first ||
                             (top[q].first == top[q - 1].first &&
                              top[q].second < top[q - 1].second));
                   --q)
                std::swap(top[q], top[q - 1]);
            }
          }
          if (top.empty()) return SimplexOutcome::optimal;
          std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) {
            return a.first > b.first || (a.first == b.first && a.second < b.second);
          });
          for (const auto& [score, j] : top) cand.push_back(j);
          enter = cand.front();
          dir = improving_dir(enter, reduced_cost(enter));
          need_full_pass = false;
          if (dir == 0) {  // cannot happen, but stay safe
            need_full_pass = true;
            continue;
          }
        }
      }

      // direction through the basis
      std::fill(wrk_w_.begin(), wrk_w_.end(), 0.0);
      for_col(enter, [&](int row, double v) { wrk_w_[row] = v; });
      ftran(wrk_w_);

      // ratio test: basic variables block, or the entering variable flips bound
      double t_enter = hi_[enter] - lo_[enter];  // inf when either side open
      double best_t = t_enter;
      int leave_slot = -1;
      for (int i = 0; i < m_; ++i) {
        const double rate = -static_cast<double>(dir) * wrk_w_[i];
        if (std::fabs(rate) <= kPivotTol) continue;
        const int bj = basic_[i];
        double t;
        if (rate < 0.0) {
          if (!std::isfinite(lo_[bj])) continue;
          t = (xB_[i] - lo_[bj]) / (-rate);
        } else {
          if (!std::isfinite(hi_[bj])) continue;
          t = (hi_[bj] - xB_[i]) / rate;
        }
        if (t < 0.0) t = 0.0;
        if (t < best_t - kTieTol) {
          best_t = t;
          leave_slot = i;
        } else if (leave_slot >= 0 && t <= best_t + kTieTol) {
          // ties: prefer the stronger pivot, then the lowest variable index
          const double wi = std::fabs(wrk_w_[i]), wb = std::fabs(wrk_w_[leave_slot]);
          if (wi > wb * (1.0 + 1e-12) ||
              (wi >= wb * (1.0 - 1e-12) && bj < basic_[leave_slot]))
            leave_slot = i;
        }
      }

      if (leave_slot < 0) {
        if (!std::isfinite(t_enter)) return SimplexOutcome::unbounded;
        // bound flip: entering variable crosses to its other bound
        for (int i = 0; i < m_; ++i)
          xB_[i] -= static_cast<double>(dir) * t_enter * wrk_w_[i];
        if (dir > 0) {
          vstat_[enter] = NB_UPPER;
          xval_[enter] = hi_[enter];
        } else {
          vstat_[enter] = NB_LOWER;
          xval_[enter] = lo_[enter];
        }
        ++n_flips_;
        continue;
      }

      const double t = best_t;
      const int leave_col = basic_[leave_slot];
      const double enter_val = xval_[enter] + static_cast<double>(dir) * t;
      for (int i = 0; i < m_; ++i)
        xB_[i] -= static_cast<double>(dir) * t * wrk_w_[i];

      // leaving variable rests at the bound it hit
      const double rate_l = -static_cast<double>(dir) * wrk_w_[leave_slot];
      if (rate_l < 0.0) {
        vstat_[leave_col] = NB_LOWER;
        xval_[leave_col] = lo_[leave_col];
      } else {
        vstat_[leave_col] = NB_UPPER;
        xval_[leave_col] = hi_[leave_col];
      }
      slot_of_[leave_col] = -1;

      basic_[leave_slot] = enter;
      slot_of_[enter] = leave_slot;
      vstat_[enter] = BASIC;
      xB_[leave_slot] = enter_val;

      etas_.push_back(Eta{leave_slot, wrk_w_});
      ++n_pivots_;
      pi_fresh = false;
      if (static_cast<int>(etas_.size()) >= refactor_every_) {
        factorize();
        recompute_xB();
      }
    }
  }
};

// ---------------------------------------------------------------------------
// StandardLP -> computational form

struct Standardized {
  CompForm F;
  int n_orig = 0;
  std::vector<int> comp_col;       // per original var; -1 when eliminated
  std::vector<double> fixed_val;   // resting value for eliminated vars
};

inline Standardized standardize(const StandardLP& lp) {
  Standardized S;
  const int n = lp.num_vars();
  S.n_orig = n;
  S.comp_col.assign(n, -1);
  S.fixed_val.assign(n, 0.0);

  const int m_eq = static_cast<int>(lp.eq_rows.size());
  const int m_le = static_cast<int>(lp.le_rows.size());
  S.F.m = m_eq + m_le;
  S.F.b.assign(S.F.m, 0.0);

  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (lp.lower[i] == lp.upper[i]) {
      S.fixed_val[i] = lp.lower[i];
    } else {
      S.comp_col[i] = next++;
    }
  }

  // per-column entry buckets, rows visited in order so entries stay sorted
  std::vector<std::vector<std::pair<int, double>>> bucket(next);
  std::vector<std::pair<int, double>> rowbuf;
  auto feed_row = [&](const LinearRow& row, int r) {
    rowbuf.clear();
    for (std::size_t k = 0; k < row.cols.size(); ++k)
      rowbuf.emplace_back(row.cols[k], row.coefs[k]);
    std::sort(rowbuf.begin(), rowbuf.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rhs = row.rhs;
    std::size_t k = 0;
    while (k < rowbuf.size()) {
      const int col = rowbuf[k].first;
      double coef = 0.0;
      while (k < rowbuf.size() && rowbuf[k].first == col) coef += rowbuf[k++].second;
      if (coef == 0.0) continue;
      if (S.comp_col[col] < 0)
        rhs -= coef * S.fixed_val[col];
      else
        bucket[S.comp_col[col]].emplace_back(r, coef);
    }
    S.F.b[r] = rhs;
  };
  for (int r = 0; r < m_eq; ++r) feed_row(lp.eq_rows[r], r);
  for (int r = 0; r < m_le; ++r) feed_row(lp.le_rows[r], m_eq + r);

  for (int i = 0; i < n; ++i) {
    if (S.comp_col[i] < 0) continue;
    S.F.add_col(lp.objective[i], lp.lower[i], lp.upper[i]);
    for (const auto& [r, v] : bucket[S.comp_col[i]]) S.F.add_entry(r, v);
  }
  for (int r = 0; r < m_le; ++r) {
    S.F.add_col(0.0, 0.0, kInf);  // slack
    S.F.add_entry(m_eq + r, 1.0);
  }
  return S;
}

// ---------------------------------------------------------------------------
// Dual route

struct DualModel {
  CompForm D;
  std::vector<int> dual_row_of;          // per primal comp column; -1 if folded
  std::vector<int> row_of_singleton;     // for folded columns: their row
  std::vector<double> sig_of_singleton;  // and coefficient
  bool conflict = false;
  bool applicable = true;
  int n_dual_rows = 0;
};

inline DualModel build_dual(const CompForm& P) {
  DualModel M;
  const int n = P.ncols();
  M.dual_row_of.assign(n, -1);
  M.row_of_singleton.assign(n, -1);
  M.sig_of_singleton.assign(n, 0.0);

  std::vector<double> ylo(P.m, -kInf), yhi(P.m, kInf);
  std::vector<int> dual_cols;  // primal columns that become dual rows

  for (int j = 0; j < n; ++j) {
    const int nnz = P.col_start[j + 1] - P.col_start[j];
    if (nnz == 0) {
      // empty column: resolvable only when its free direction is closed
      const double c = P.cost[j];
      if ((c > 0 && !std::isfinite(P.lo[j])) || (c < 0 && !std::isfinite(P.hi[j]))) {
        M.applicable = false;
        return M;
      }
      continue;  // value assigned during reconstruction
    }
    if (nnz == 1) {
      const int r = P.row_index[P.col_start[j]];
      const double v = P.value[P.col_start[j]];
      const double lim = P.cost[j] / v;
      const bool lo0 = P.lo[j] == 0.0, hiinf = !std::isfinite(P.hi[j]);
      const bool hi0 = P.hi[j] == 0.0, loinf = !std::isfinite(P.lo[j]);
      if (lo0 && hiinf) {  // x >= 0
        if (v > 0) yhi[r] = std::min(yhi[r], lim);
        else ylo[r] = std::max(ylo[r], lim);
        M.row_of_singleton[j] = r;
        M.sig_of_singleton[j] = v;
        continue;
      }
      if (hi0 && loinf) {  // x <= 0
        if (v > 0) ylo[r] = std::max(ylo[r], lim);
        else yhi[r] = std::min(yhi[r], lim);
        M.row_of_singleton[j] = r;
        M.sig_of_singleton[j] = v;
        continue;
      }
      if (loinf && hiinf) {  // free singleton fixes the row's dual value
        ylo[r] = std::max(ylo[r], lim);
        yhi[r] = std::min(yhi[r], lim);
        M.row_of_singleton[j] = r;
        M.sig_of_singleton[j] = v;
        continue;
      }
    }
    M.dual_row_of[j] = static_cast<int>(dual_cols.size());
    dual_cols.push_back(j);
  }

  for (int r = 0; r < P.m; ++r)
    if (ylo[r] > yhi[r] + 1e-12) M.conflict = true;

  M.n_dual_rows = static_cast<int>(dual_cols.size());
  M.D.m = M.n_dual_rows;
  M.D.b.resize(M.n_dual_rows);
  for (int q = 0; q < M.n_dual_rows; ++q) M.D.b[q] = P.cost[dual_cols[q]];

  // y columns: transpose of the non-folded primal columns
  std::vector<std::vector<std::pair<int, double>>> ycol(P.m);
  for (int q = 0; q < M.n_dual_rows; ++q) {
    const int j = dual_cols[q];
    for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
      ycol[P.row_index[k]].emplace_back(q, P.value[k]);
  }
  for (int r = 0; r < P.m; ++r) {
    double l = ylo[r], h = yhi[r];
    if (l > h) {  // numerically crossed fix; collapse to midpoint
      const double mid = 0.5 * (l + h);
      l = h = mid;
    }
    M.D.add_col(-P.b[r], l, h);
    for (const auto& [q, v] : ycol[r]) M.D.add_entry(q, v);
  }
  // reduced-cost splits for boxed non-folded columns
  for (int q = 0; q < M.n_dual_rows; ++q) {
    const int j = dual_cols[q];
    if (std::isfinite(P.lo[j])) {
      M.D.add_col(-P.lo[j], 0.0, kInf);
      M.D.add_entry(q, 1.0);
    }
    if (std::isfinite(P.hi[j])) {
      M.D.add_col(P.hi[j], 0.0, kInf);
      M.D.add_entry(q, -1.0);
    }
  }
  return M;
}

inline void assign_empty_and_singletons(const CompForm& P, const DualModel& M,
                                        std::vector<double>& x, double feas_tol) {
  // empty columns
  for (int j = 0; j < P.ncols(); ++j) {
    const int nnz = P.col_start[j + 1] - P.col_start[j];
    if (nnz > 0) continue;
    if (P.cost[j] > 0.0) x[j] = P.lo[j];
    else if (P.cost[j] < 0.0) x[j] = P.hi[j];
    else x[j] = std::clamp(0.0, P.lo[j], P.hi[j]);
  }
  // per-row residual split across folded singleton columns
  std::vector<double> resid = P.b;
  for (int j = 0; j < P.ncols(); ++j)
    if (M.dual_row_of[j] >= 0 && x[j] != 0.0)
      for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
        resid[P.row_index[k]] -= P.value[k] * x[j];

  std::vector<std::vector<int>> row_singles(P.m);
  for (int j = 0; j < P.ncols(); ++j)
    if (M.row_of_singleton[j] >= 0) row_singles[M.row_of_singleton[j]].push_back(j);

  for (int r = 0; r < P.m; ++r) {
    const double rho = resid[r];
    if (row_singles[r].empty()) continue;
    if (std::fabs(rho) <= 1e-300) continue;
    int pick = -1;
    double pick_val = 0.0, pick_cost = kInf;
    for (int j : row_singles[r]) {
      const double val = rho / M.sig_of_singleton[j];
      const double slack = feas_tol * (1.0 + std::fabs(val));
      if (val < P.lo[j] - slack || val > P.hi[j] + slack) continue;
      const double c = P.cost[j] * val;
      if (c < pick_cost - 1e-15) {
        pick_cost = c;
        pick = j;
        pick_val = val;
      }
    }
    if (pick >= 0) x[pick] = std::clamp(pick_val, P.lo[pick], P.hi[pick]);
    // an unassignable residual is left for the feasibility check to flag
  }
}

}  // namespace mqrlr::detail

namespace mqrlr {

inline LpSolution solve(const StandardLP& lp, const SolveOptions& opts) {
  lp.validate();
  detail::Standardized S = detail::standardize(lp);
  const detail::CompForm& P = S.F;

  auto finish = [&](const std::vector<double>& xcomp, long iters) {
    LpSolution sol;
    sol.status = LpStatus::optimal;
    sol.iterations = iters;
    sol.x.assign(S.n_orig, 0.0);
    for (int i = 0; i < S.n_orig; ++i)
      sol.x[i] = S.comp_col[i] >= 0 ? xcomp[S.comp_col[i]] : S.fixed_val[i];
    double obj = 0.0;
    for (int i = 0; i < S.n_orig; ++i) obj += lp.objective[i] * sol.x[i];
    sol.objective_value = obj;
    return sol;
  };

  auto verify_rows = [&](const std::vector<double>& xcomp) {
    std::vector<double> acc(P.m, 0.0);
    for (int j = 0; j < P.ncols(); ++j)
      if (xcomp[j] != 0.0)
        for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
          acc[P.row_index[k]] += P.value[k] * xcomp[j];
    for (int r = 0; r < P.m; ++r)
      if (std::fabs(acc[r] - P.b[r]) > opts.feas_tol * (1.0 + std::fabs(P.b[r])) * 10.0)
        return false;
    return true;
  };

  SolveOptions::Route route = opts.route;
  if (route == SolveOptions::Route::automatic) {
    int ndual = 0;
    for (int j = 0; j < P.ncols(); ++j) {
      const int nnz = P.col_start[j + 1] - P.col_start[j];
      if (nnz >= 2) ++ndual;
      else if (nnz == 1) {
        const bool plain = (P.lo[j] == 0.0 && !std::isfinite(P.hi[j])) ||
                           (P.hi[j] == 0.0 && !std::isfinite(P.lo[j])) ||
                           (!std::isfinite(P.lo[j]) && !std::isfinite(P.hi[j]));
        if (!plain) ++ndual;
      }
    }
    route = (P.m >= 200 && ndual * 2 <= P.m && ndual <= 2000)
                ? SolveOptions::Route::dual
                : SolveOptions::Route::primal;
  }

  if (route == SolveOptions::Route::dual) {
    detail::DualModel M = detail::build_dual(P);
    if (!M.applicable)
      throw SolverError("lp solve: dual route cannot frame this problem", 0, "dual");
    if (M.conflict)
      throw SolverError("lp solve: dual bounds conflict; primal status ambiguous", 0,
                        "dual");
    detail::BoundedSimplex engine(M.D, opts);
    const auto out = engine.run();
    if (out == detail::SimplexOutcome::stalled)
      throw SolverError("lp solve: dual simplex stalled", engine.iterations(), "dual");
    if (out == detail::SimplexOutcome::infeasible)
      throw SolverError("lp solve: dual infeasible; primal status ambiguous",
                        engine.iterations(), "dual");
    if (out == detail::SimplexOutcome::unbounded) {
      LpSolution sol;
      sol.status = LpStatus::infeasible;
      sol.iterations = engine.iterations();
      return sol;
    }
    const std::vector<double> piv = engine.row_multipliers();
    std::vector<double> xcomp(P.ncols(), 0.0);
    for (int j = 0; j < P.ncols(); ++j)
      if (M.dual_row_of[j] >= 0) xcomp[j] = -piv[M.dual_row_of[j]];
    detail::assign_empty_and_singletons(P, M, xcomp, opts.feas_tol);

    if (!verify_rows(xcomp))
      throw SolverError("lp solve: reconstructed point violates feasibility",
                        engine.iterations(), "dual");
    double pobj = 0.0;
    for (int j = 0; j < P.ncols(); ++j) pobj += P.cost[j] * xcomp[j];
    const double dobj = -engine.objective();
    if (std::fabs(pobj - dobj) > 1e-7 * (1.0 + std::fabs(pobj)))
      throw SolverError("lp solve: duality gap " + format_double(pobj - dobj) +
                            " fails the optimality certificate",
                        engine.iterations(), "dual");
    return finish(xcomp, engine.iterations());
  }

  detail::BoundedSimplex engine(P, opts);
  const auto out = engine.run();
  if (out == detail::SimplexOutcome::stalled)
    throw SolverError("lp solve: simplex stalled", engine.iterations(), "primal");
  if (out == detail::SimplexOutcome::infeasible) {
    LpSolution sol;
    sol.status = LpStatus::infeasible;
    sol.iterations = engine.iterations();
    return sol;
  }
  if (out == detail::SimplexOutcome::unbounded) {
    LpSolution sol;
    sol.status = LpStatus::unbounded;
    sol.iterations = engine.iterations();
    return sol;
  }
  std::vector<double> xcomp = engine.primal_values();
  if (!verify_rows(xcomp))
    throw SolverError("lp solve: solution violates feasibility",
                      engine.iterations(), "primal");
  return finish(xcomp, engine.iterations());
}

}  // namespace mqrlr
