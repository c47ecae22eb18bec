#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kpcert/encode.hpp"
#include "kpcert/instance.hpp"
#include "kpcert/lp.hpp"

namespace kpcert {

struct MilpTolerances {
  double int_tol = 1e-9;
  double assignment_tol = kAssignmentTol;
  lp::LpOptions lp;
};

enum class SearchStatus { kInfeasible, kFeasible, kResourceLimit };
enum class LimitReason { kNone, kNodeLimit, kTimeLimit, kNumericalFailure };

const char* to_string(LimitReason reason);

struct SearchStats {
  std::size_t nodes = 0;
  std::size_t lp_calls = 0;
  std::size_t max_depth = 0;
  double wall_time_s = 0.0;
};

struct SearchResult {
  SearchStatus status = SearchStatus::kResourceLimit;
  std::vector<double> assignment;  // set iff kFeasible
  LimitReason reason = LimitReason::kNone;
  std::string detail;
  SearchStats stats;
};

// Depth-first LP-based branch and bound for feasibility. Branches on the most
// fractional integer variable (lowest id on ties) and explores the child on
// the side of the nearer integer first. kInfeasible is returned only when
// every node was closed by an infeasible relaxation.
SearchResult milp_feasible(const MilpModel& model, const SolverLimits& limits,
                           const MilpTolerances& tol = {});

enum class VerdictStatus { kRobust, kUnknown, kInconclusive };

const char* to_string(VerdictStatus status);

struct Verdict {
  VerdictStatus status = VerdictStatus::kInconclusive;
  std::optional<Counterexample> counterexample;  // iff kUnknown
  LimitReason reason = LimitReason::kNone;       // set iff kInconclusive
  std::string detail;
  // Validation report of a decoded witness that failed to validate.
  std::optional<ValidationReport> rejected_witness;
  SearchStats stats;
  std::size_t model_variables = 0;
  std::size_t model_constraints = 0;
};

struct VerifyOptions {
  bool pruning = true;
  // Use per-facet Big-M constants; otherwise the instance's fallback value.
  bool tight_big_m = true;
  MilpTolerances tol;
};

struct PreparedModel {
  IntegerBox box;
  std::vector<double> big_m;
  IndexSets sets;
  BoundsMatrix bounds;
  MilpModel model;
};

// Runs every step up to (not including) the search.
PreparedModel prepare_model(const ProblemInstance& inst,
                            const VerifyOptions& options = {});

// Robust: the falsification program is infeasible, so no heatmap in the
// reachable set puts the keypoints outside the polytope. Unknown: a validated
// counterexample heatmap exists in the (over-approximate) reachable set.
// Inconclusive: the search ran out of budget or hit a numerical failure.
// Throws InputError for malformed instances.
Verdict verify(const ProblemInstance& inst, const VerifyOptions& options = {});

}  // namespace kpcert
