#include "kpcert/lp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace kpcert::lp {
namespace {

constexpr double kDualTol = 1e-9;
constexpr double kDegenerateStep = 1e-12;
constexpr std::size_t kRefactorInterval = 100;

enum class VarState { kBasic, kAtLower, kAtUpper, kFree };

// Problem after substituting fixed variables and dropping empty rows.
struct Reduced {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<double> a;  // m x n, row-major
  std::vector<double> b;
  std::vector<Relation> rel;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> cost;
  std::vector<std::size_t> column_var;  // structural column -> problem var
  std::vector<double> fixed_value;      // per problem var, NaN if free
  bool infeasible = false;
  std::string detail;
};

Reduced presolve(const LpProblem& p, double feas_tol) {
  Reduced r;
  const std::size_t nv = p.num_vars();
  r.fixed_value.assign(nv, std::nan(""));
  std::vector<std::size_t> var_column(nv, SIZE_MAX);
  for (std::size_t v = 0; v < nv; ++v) {
    double lo = p.lower[v];
    double hi = p.upper[v];
    if (lo > hi + feas_tol) {
      r.infeasible = true;
      r.detail = "variable " + std::to_string(v) + " has empty bounds";
      return r;
    }
    if (lo >= hi) {
      r.fixed_value[v] = lo;
      continue;
    }
    var_column[v] = r.column_var.size();
    r.column_var.push_back(v);
    r.lo.push_back(lo);
    r.hi.push_back(hi);
    r.cost.push_back(p.objective.empty() ? 0.0 : p.objective[v]);
  }
  r.n = r.column_var.size();

  std::map<std::size_t, double> merged;
  for (std::size_t row_index = 0; row_index < p.rows.size(); ++row_index) {
    const auto& row = p.rows[row_index];
    merged.clear();
    double rhs = row.rhs;
    double scale = 1.0 + std::abs(row.rhs);
    for (const auto& term : row.terms) {
      if (term.coef == 0.0) continue;
      if (!std::isnan(r.fixed_value[term.var])) {
        double c = term.coef * r.fixed_value[term.var];
        rhs -= c;
        scale = std::max(scale, 1.0 + std::abs(c));
      } else {
        merged[var_column[term.var]] += term.coef;
      }
    }
    std::erase_if(merged, [](const auto& kv) { return kv.second == 0.0; });
    if (merged.empty()) {
      bool ok = true;
      double tol = feas_tol * scale;
      switch (row.relation) {
        case Relation::kLessEqual: ok = 0.0 <= rhs + tol; break;
        case Relation::kGreaterEqual: ok = 0.0 >= rhs - tol; break;
        case Relation::kEqual: ok = std::abs(rhs) <= tol; break;
      }
      if (!ok) {
        r.infeasible = true;
        r.detail = "row " + std::to_string(row_index) +
                   " violated after fixing variables (residual " +
                   std::to_string(rhs) + ")";
        return r;
      }
      continue;
    }
    std::size_t i = r.m++;
    r.a.resize(r.m * r.n, 0.0);
    for (const auto& [col, coef] : merged) r.a[i * r.n + col] = coef;
    r.b.push_back(rhs);
    r.rel.push_back(row.relation);
  }
  return r;
}

class Simplex {
 public:
  Simplex(const Reduced& red, const LpOptions& opt)
      : red_(red), opt_(opt), m_(red.m), n_(red.n), cols_(red.n + red.m) {
    lo_ = red.lo;
    hi_ = red.hi;
    cost_ = red.cost;
    for (std::size_t i = 0; i < m_; ++i) {
      switch (red.rel[i]) {
        case Relation::kLessEqual: lo_.push_back(0.0); hi_.push_back(kInf); break;
        case Relation::kGreaterEqual: lo_.push_back(-kInf); hi_.push_back(0.0); break;
        case Relation::kEqual: lo_.push_back(0.0); hi_.push_back(0.0); break;
      }
      cost_.push_back(0.0);
    }
    state_.assign(cols_, VarState::kFree);
    val_.assign(cols_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lo_[j])) {
        state_[j] = VarState::kAtLower;
        val_[j] = lo_[j];
      } else if (std::isfinite(hi_[j])) {
        state_[j] = VarState::kAtUpper;
        val_[j] = hi_[j];
      }
    }
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      state_[n_ + i] = VarState::kBasic;
    }
    iter_limit_ = opt.iter_limit ? opt.iter_limit : 50 * (m_ + cols_);
  }

  LpStatus run(std::string& detail) {
    if (!refactor()) {
      detail = "singular basis";
      return LpStatus::kNumericalFailure;
    }
    const bool has_objective =
        std::any_of(cost_.begin(), cost_.end(), [](double c) { return c != 0.0; });
    for (int attempt = 0; attempt < 4; ++attempt) {
      LpStatus s = phase_one(detail);
      if (s != LpStatus::kOptimal) return s;
      if (!has_objective) return LpStatus::kOptimal;
      s = phase_two(detail);
      if (s != LpStatus::kOptimal) return s;
      if (!refactor()) {
        detail = "singular basis";
        return LpStatus::kNumericalFailure;
      }
      if (infeasibility() <= opt_.feas_tol) return LpStatus::kOptimal;
      // Drift pushed a basic variable out of its bounds; restart phase one.
    }
    detail = "basis kept drifting infeasible";
    return LpStatus::kNumericalFailure;
  }

  std::vector<double> structural_values() const {
    return {val_.begin(), val_.begin() + static_cast<std::ptrdiff_t>(n_)};
  }
  std::size_t iterations() const { return iterations_; }

  // Farkas check of the current phase-one optimum: y = c_B^T B^{-1} must
  // separate y^T b from the range of y^T [A I] over the variable bounds.
  bool infeasibility_certified() const {
    std::vector<double> cb = phase_one_costs();
    std::vector<double> y(m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      if (cb[r] == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) y[i] += cb[r] * tab(r, n_ + i);
    }
    double ytb = 0.0;
    for (std::size_t i = 0; i < m_; ++i) ytb += y[i] * red_.b[i];
    double upper = 0.0;
    double lower = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      double w = 0.0;
      if (j < n_) {
        for (std::size_t i = 0; i < m_; ++i) w += y[i] * red_.a[i * n_ + j];
      } else {
        w = y[j - n_];
      }
      if (std::abs(w) <= kDualTol) continue;
      upper += w > 0 ? w * hi_[j] : w * lo_[j];
      lower += w > 0 ? w * lo_[j] : w * hi_[j];
    }
    double margin = opt_.feas_tol * 0.5;
    return ytb > upper + margin || ytb < lower - margin;
  }

 private:
  double& tab(std::size_t r, std::size_t c) { return tab_[r * cols_ + c]; }
  double tab(std::size_t r, std::size_t c) const { return tab_[r * cols_ + c]; }

  double original(std::size_t i, std::size_t j) const {
    if (j < n_) return red_.a[i * n_ + j];
    return j - n_ == i ? 1.0 : 0.0;
  }

  // Rebuilds B^{-1}[A I] and the basic values from the raw data.
  bool refactor() {
    tab_.assign(m_ * cols_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) tab(i, j) = red_.a[i * n_ + j];
      tab(i, n_ + i) = 1.0;
    }
    std::vector<std::size_t> new_basis(m_, SIZE_MAX);
    std::vector<bool> assigned(m_, false);
    for (std::size_t col : basis_) {
      std::size_t best = SIZE_MAX;
      double best_abs = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        if (assigned[r]) continue;
        double v = std::abs(tab(r, col));
        if (v > best_abs) {
          best_abs = v;
          best = r;
        }
      }
      if (best == SIZE_MAX || best_abs <= opt_.pivot_tol) return false;
      pivot(best, col);
      assigned[best] = true;
      new_basis[best] = col;
    }
    basis_ = std::move(new_basis);
    pivots_since_refactor_ = 0;

    std::vector<double> rhs = red_.b;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (state_[j] == VarState::kBasic || val_[j] == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) rhs[i] -= original(i, j) * val_[j];
    }
    for (std::size_t r = 0; r < m_; ++r) {
      double v = 0.0;
      for (std::size_t i = 0; i < m_; ++i) v += tab(r, n_ + i) * rhs[i];
      val_[basis_[r]] = v;
    }
    return true;
  }

  void pivot(std::size_t r, std::size_t c) {
    double* prow = &tab_[r * cols_];
    const double inv = 1.0 / prow[c];
    for (std::size_t j = 0; j < cols_; ++j) prow[j] *= inv;
    prow[c] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &tab_[i * cols_];
      const double f = row[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) row[j] -= f * prow[j];
      row[c] = 0.0;
    }
  }

  std::vector<double> phase_one_costs() const {
    std::vector<double> cb(m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      std::size_t c = basis_[r];
      if (val_[c] > hi_[c] + opt_.feas_tol) cb[r] = 1.0;
      else if (val_[c] < lo_[c] - opt_.feas_tol) cb[r] = -1.0;
    }
    return cb;
  }

  double infeasibility() const {
    double s = 0.0;
    for (std::size_t r = 0; r < m_; ++r) {
      std::size_t c = basis_[r];
      if (val_[c] > hi_[c] + opt_.feas_tol) s += val_[c] - hi_[c];
      else if (val_[c] < lo_[c] - opt_.feas_tol) s += lo_[c] - val_[c];
    }
    return s;
  }

  // Picks an improving nonbasic column given basic costs `cb` and
  // nonbasic costs `cn` (empty in phase one). Returns SIZE_MAX at optimum.
  std::size_t choose_entering(const std::vector<double>& cb,
                              const std::vector<double>& cn, int& dir) const {
    std::vector<double> d(cols_, 0.0);
    if (!cn.empty()) d = cn;
    for (std::size_t r = 0; r < m_; ++r) {
      if (cb[r] == 0.0) continue;
      const double* row = &tab_[r * cols_];
      for (std::size_t j = 0; j < cols_; ++j) d[j] -= cb[r] * row[j];
    }
    std::size_t best = SIZE_MAX;
    double best_score = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      int jd = 0;
      switch (state_[j]) {
        case VarState::kBasic: continue;
        case VarState::kAtLower:
          if (hi_[j] > lo_[j] && d[j] < -kDualTol) jd = 1;
          break;
        case VarState::kAtUpper:
          if (hi_[j] > lo_[j] && d[j] > kDualTol) jd = -1;
          break;
        case VarState::kFree:
          if (std::abs(d[j]) > kDualTol) jd = d[j] < 0 ? 1 : -1;
          break;
      }
      if (jd == 0) continue;
      if (bland_) {
        dir = jd;
        return j;
      }
      if (std::abs(d[j]) > best_score) {
        best_score = std::abs(d[j]);
        best = j;
        dir = jd;
      }
    }
    return best;
  }

  enum class StepResult { kMoved, kUnbounded };

  StepResult step(std::size_t enter, int dir, bool phase_one) {
    const double tol = opt_.feas_tol;
    double theta = kInf;
    if (std::isfinite(lo_[enter]) && std::isfinite(hi_[enter])) {
      theta = hi_[enter] - lo_[enter];
    }
    std::size_t leave_row = SIZE_MAX;
    double leave_target = 0.0;
    double leave_pivot = 0.0;
    for (std::size_t r = 0; r < m_; ++r) {
      const double alpha = tab(r, enter);
      if (std::abs(alpha) <= opt_.pivot_tol) continue;
      const double rate = -dir * alpha;
      const std::size_t c = basis_[r];
      const double x = val_[c];
      double target;
      if (rate > 0) {
        if (phase_one && x < lo_[c] - tol) target = lo_[c];
        else if (x > hi_[c] + tol || !std::isfinite(hi_[c])) continue;
        else target = hi_[c];
      } else {
        if (phase_one && x > hi_[c] + tol) target = hi_[c];
        else if (x < lo_[c] - tol || !std::isfinite(lo_[c])) continue;
        else target = lo_[c];
      }
      const double t = std::max(0.0, (target - x) / rate);
      bool take = false;
      if (t < theta - kDegenerateStep) {
        take = true;
      } else if (leave_row != SIZE_MAX && t <= theta + kDegenerateStep) {
        take = bland_ ? c < basis_[leave_row]
                      : std::abs(alpha) > std::abs(leave_pivot);
      }
      if (take) {
        theta = t;
        leave_row = r;
        leave_target = target;
        leave_pivot = alpha;
      }
    }
    if (!std::isfinite(theta)) return StepResult::kUnbounded;

    if (theta <= kDegenerateStep) {
      if (++degenerate_run_ > opt_.degenerate_threshold) bland_ = true;
    } else {
      degenerate_run_ = 0;
      bland_ = false;
    }

    for (std::size_t r = 0; r < m_; ++r) {
      const double alpha = tab(r, enter);
      if (alpha != 0.0) val_[basis_[r]] -= dir * alpha * theta;
    }
    if (leave_row == SIZE_MAX) {
      // Bound flip.
      val_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
      state_[enter] = dir > 0 ? VarState::kAtUpper : VarState::kAtLower;
      return StepResult::kMoved;
    }
    const std::size_t leave = basis_[leave_row];
    val_[enter] += dir * theta;
    val_[leave] = leave_target;
    state_[leave] = leave_target == lo_[leave] ? VarState::kAtLower
                                               : VarState::kAtUpper;
    state_[enter] = VarState::kBasic;
    pivot(leave_row, enter);
    basis_[leave_row] = enter;
    ++pivots_since_refactor_;
    return StepResult::kMoved;
  }

  LpStatus phase_one(std::string& detail) {
    bool rechecked = false;
    while (true) {
      std::vector<double> cb = phase_one_costs();
      if (std::all_of(cb.begin(), cb.end(), [](double c) { return c == 0.0; })) {
        return LpStatus::kOptimal;
      }
      int dir = 0;
      std::size_t enter = choose_entering(cb, {}, dir);
      if (enter == SIZE_MAX) {
        if (!rechecked) {
          rechecked = true;
          if (!refactor()) {
            detail = "singular basis";
            return LpStatus::kNumericalFailure;
          }
          continue;
        }
        if (opt_.certify && !infeasibility_certified()) {
          detail = "phase-one optimum does not close as a Farkas certificate";
          return LpStatus::kNumericalFailure;
        }
        detail = "phase-one infeasibility " + std::to_string(infeasibility());
        return LpStatus::kInfeasible;
      }
      rechecked = false;
      if (!tick(detail)) return LpStatus::kNumericalFailure;
      if (step(enter, dir, true) == StepResult::kUnbounded) {
        detail = "unbounded phase-one ray";
        return LpStatus::kNumericalFailure;
      }
    }
  }

  LpStatus phase_two(std::string& detail) {
    bland_ = false;
    degenerate_run_ = 0;
    while (true) {
      std::vector<double> cb(m_);
      for (std::size_t r = 0; r < m_; ++r) cb[r] = cost_[basis_[r]];
      std::vector<double> cn(cols_, 0.0);
      for (std::size_t j = 0; j < cols_; ++j) {
        if (state_[j] != VarState::kBasic) cn[j] = cost_[j];
      }
      int dir = 0;
      std::size_t enter = choose_entering(cb, cn, dir);
      if (enter == SIZE_MAX) return LpStatus::kOptimal;
      if (!tick(detail)) return LpStatus::kNumericalFailure;
      if (step(enter, dir, false) == StepResult::kUnbounded) {
        detail = "objective unbounded along column " + std::to_string(enter);
        return LpStatus::kUnbounded;
      }
    }
  }

  bool tick(std::string& detail) {
    if (++iterations_ > iter_limit_) {
      detail = "iteration limit " + std::to_string(iter_limit_) + " reached";
      return false;
    }
    if (pivots_since_refactor_ >= kRefactorInterval && !refactor()) {
      detail = "singular basis";
      return false;
    }
    return true;
  }

  const Reduced& red_;
  const LpOptions& opt_;
  std::size_t m_;
  std::size_t n_;
  std::size_t cols_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<double> cost_;
  std::vector<VarState> state_;
  std::vector<double> val_;
  std::vector<std::size_t> basis_;
  std::vector<double> tab_;
  std::size_t iterations_ = 0;
  std::size_t iter_limit_ = 0;
  std::size_t pivots_since_refactor_ = 0;
  std::size_t degenerate_run_ = 0;
  bool bland_ = false;
};

}  // namespace

std::size_t LpProblem::add_variable(double lo, double hi, double cost) {
  lower.push_back(lo);
  upper.push_back(hi);
  if (cost != 0.0 || !objective.empty()) {
    objective.resize(lower.size(), 0.0);
    objective.back() = cost;
  }
  return lower.size() - 1;
}

void LpProblem::add_row(std::vector<Term> terms, Relation relation,
                        double rhs) {
  rows.push_back(Row{std::move(terms), relation, rhs});
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "?";
}

double max_violation(const LpProblem& p, std::span<const double> x) {
  double worst = 0.0;
  for (std::size_t v = 0; v < p.num_vars(); ++v) {
    worst = std::max(worst, p.lower[v] - x[v]);
    worst = std::max(worst, x[v] - p.upper[v]);
  }
  for (const auto& row : p.rows) {
    double lhs = 0.0;
    double scale = 1.0 + std::abs(row.rhs);
    for (const auto& t : row.terms) {
      double c = t.coef * x[t.var];
      lhs += c;
      scale = std::max(scale, 1.0 + std::abs(c));
    }
    double viol = 0.0;
    switch (row.relation) {
      case Relation::kLessEqual: viol = lhs - row.rhs; break;
      case Relation::kGreaterEqual: viol = row.rhs - lhs; break;
      case Relation::kEqual: viol = std::abs(lhs - row.rhs); break;
    }
    worst = std::max(worst, viol / scale);
  }
  return worst;
}

LpOutcome lp_solve(const LpProblem& problem, const LpOptions& options) {
  LpOutcome out;
  if (!problem.objective.empty() &&
      problem.objective.size() != problem.num_vars()) {
    out.detail = "objective length does not match variable count";
    return out;
  }
  Reduced red = presolve(problem, options.feas_tol);
  if (red.infeasible) {
    out.status = LpStatus::kInfeasible;
    out.detail = red.detail;
    return out;
  }

  Simplex simplex(red, options);
  std::string detail;
  LpStatus status = simplex.run(detail);
  out.iterations = simplex.iterations();
  out.detail = detail;
  if (status != LpStatus::kOptimal) {
    out.status = status;
    return out;
  }

  out.x.assign(problem.num_vars(), 0.0);
  std::vector<double> cols = simplex.structural_values();
  for (std::size_t v = 0; v < problem.num_vars(); ++v) {
    if (!std::isnan(red.fixed_value[v])) out.x[v] = red.fixed_value[v];
  }
  for (std::size_t c = 0; c < red.n; ++c) out.x[red.column_var[c]] = cols[c];
  double viol = max_violation(problem, out.x);
  if (viol > options.feas_tol) {
    out.status = LpStatus::kNumericalFailure;
    out.detail = "returned point violates constraints by " + std::to_string(viol);
    out.x.clear();
    return out;
  }
  out.status = LpStatus::kOptimal;
  if (!problem.objective.empty()) {
    for (std::size_t v = 0; v < problem.num_vars(); ++v) {
      out.objective += problem.objective[v] * out.x[v];
    }
  }
  return out;
}

}  // namespace kpcert::lp
