#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace kpcert::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { kLessEqual, kEqual, kGreaterEqual };

struct Term {
  std::size_t var;
  double coef;
};

struct Row {
  std::vector<Term> terms;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;
};

// min c^T x  s.t.  rows,  lower <= x <= upper  (bounds may be +-kInf).
// An empty objective means a pure feasibility problem.
struct LpProblem {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> objective;
  std::vector<Row> rows;

  std::size_t num_vars() const { return lower.size(); }
  std::size_t add_variable(double lo, double hi, double cost = 0.0);
  void add_row(std::vector<Term> terms, Relation relation, double rhs);
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

const char* to_string(LpStatus status);

struct LpOptions {
  double feas_tol = 1e-7;
  double pivot_tol = 1e-9;
  // 0 selects 50 * (rows + cols).
  std::size_t iter_limit = 0;
  // Consecutive degenerate pivots before switching to Bland's rule.
  std::size_t degenerate_threshold = 50;
  // Re-derive every infeasibility verdict as a Farkas certificate from the
  // raw constraint data; a certificate that does not close is reported as
  // kNumericalFailure instead of kInfeasible.
  bool certify = false;
};

struct LpOutcome {
  LpStatus status = LpStatus::kNumericalFailure;
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::string detail;
};

// Two-phase bounded-variable primal simplex on a dense tableau.
LpOutcome lp_solve(const LpProblem& problem, const LpOptions& options = {});

// Largest bound or row violation of `x`, each row scaled by
// 1 + max |a_k x_k|. Used to re-verify solver output independently.
double max_violation(const LpProblem& problem, std::span<const double> x);

}  // namespace kpcert::lp
