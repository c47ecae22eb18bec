#include "kpcert/verify.hpp"

#include <chrono>
#include <cmath>

#include "kpcert/error.hpp"

namespace kpcert {
namespace {

constexpr double kMinBranchFrac = 1e-12;

struct Node {
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t depth = 0;
};

}  // namespace

const char* to_string(LimitReason reason) {
  switch (reason) {
    case LimitReason::kNone: return "none";
    case LimitReason::kNodeLimit: return "node-limit";
    case LimitReason::kTimeLimit: return "time-limit";
    case LimitReason::kNumericalFailure: return "numerical-failure";
  }
  return "?";
}

const char* to_string(VerdictStatus status) {
  switch (status) {
    case VerdictStatus::kRobust: return "robust";
    case VerdictStatus::kUnknown: return "unknown";
    case VerdictStatus::kInconclusive: return "inconclusive";
  }
  return "?";
}

SearchResult milp_feasible(const MilpModel& model, const SolverLimits& limits,
                           const MilpTolerances& tol) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto& vars = model.variables();

  SearchResult result;
  auto elapsed = [&] {
    return std::chrono::duration<double>(Clock::now() - start).count();
  };
  auto finish = [&](SearchStatus status, LimitReason reason, std::string detail) {
    result.status = status;
    result.reason = reason;
    result.detail = std::move(detail);
    result.stats.wall_time_s = elapsed();
    return result;
  };

  std::vector<Node> stack;
  {
    Node root;
    for (const auto& v : vars) {
      root.lower.push_back(v.lower);
      root.upper.push_back(v.upper);
    }
    stack.push_back(std::move(root));
  }

  while (!stack.empty()) {
    if (result.stats.nodes >= limits.max_nodes) {
      return finish(SearchStatus::kResourceLimit, LimitReason::kNodeLimit,
                    "explored " + std::to_string(result.stats.nodes) + " nodes");
    }
    if (elapsed() > limits.time_budget_s) {
      return finish(SearchStatus::kResourceLimit, LimitReason::kTimeLimit,
                    "time budget of " + std::to_string(limits.time_budget_s) +
                        " s exhausted");
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    ++result.stats.nodes;
    result.stats.max_depth = std::max(result.stats.max_depth, node.depth);

    lp::LpOutcome out = lp::lp_solve(model.relaxation(node.lower, node.upper), tol.lp);
    ++result.stats.lp_calls;
    if (out.status == lp::LpStatus::kInfeasible) continue;
    if (out.status != lp::LpStatus::kOptimal) {
      return finish(SearchStatus::kResourceLimit, LimitReason::kNumericalFailure,
                    std::string("node relaxation: ") + lp::to_string(out.status) +
                        " (" + out.detail + ")");
    }

    std::size_t branch = SIZE_MAX;
    std::size_t widest = SIZE_MAX;
    double best_frac = 0.0;
    for (std::size_t v = 0; v < vars.size(); ++v) {
      if (vars[v].kind == VarKind::kContinuous) continue;
      double f = out.x[v] - std::floor(out.x[v]);
      double dist = std::min(f, 1.0 - f);
      if (dist > best_frac) {
        best_frac = dist;
        widest = v;
      }
    }
    if (best_frac > tol.int_tol) branch = widest;

    if (branch == SIZE_MAX) {
      // Integral relaxation: pin the integers and re-derive the continuous
      // part so the accepted point satisfies the raw rows exactly.
      std::vector<double> lo = node.lower;
      std::vector<double> hi = node.upper;
      for (std::size_t v = 0; v < vars.size(); ++v) {
        if (vars[v].kind == VarKind::kContinuous) continue;
        lo[v] = hi[v] = std::round(out.x[v]);
      }
      lp::LpOutcome fixed = lp::lp_solve(model.relaxation(lo, hi), tol.lp);
      ++result.stats.lp_calls;
      if (fixed.status == lp::LpStatus::kOptimal) {
        double viol = model.max_violation(fixed.x);
        if (viol > tol.assignment_tol) {
          return finish(SearchStatus::kResourceLimit, LimitReason::kNumericalFailure,
                        "rounded point violates the model by " + std::to_string(viol));
        }
        result.assignment = std::move(fixed.x);
        return finish(SearchStatus::kFeasible, LimitReason::kNone, "");
      }
      // A tiny fractional part can carry an epsilon-sized slack through a
      // big-M row; rounding it away loses the point, so keep branching.
      if (fixed.status != lp::LpStatus::kInfeasible || best_frac <= kMinBranchFrac) {
        return finish(SearchStatus::kResourceLimit, LimitReason::kNumericalFailure,
                      std::string("rounded integer point re-solve: ") +
                          lp::to_string(fixed.status) + " (" + fixed.detail + ")");
      }
      branch = widest;
    }

    const double x = out.x[branch];
    const double fl = std::floor(x);
    Node down{node.lower, node.upper, node.depth + 1};
    down.upper[branch] = fl;
    Node up{std::move(node.lower), std::move(node.upper), node.depth + 1};
    up.lower[branch] = fl + 1.0;
    // Last pushed is explored first.
    if (x - fl > 0.5) {
      stack.push_back(std::move(down));
      stack.push_back(std::move(up));
    } else {
      stack.push_back(std::move(up));
      stack.push_back(std::move(down));
    }
  }
  return finish(SearchStatus::kInfeasible, LimitReason::kNone, "");
}

PreparedModel prepare_model(const ProblemInstance& inst,
                            const VerifyOptions& options) {
  inst.validate();
  PreparedModel pm;
  pm.box = deviation_box(inst);
  pm.big_m = big_m_vector(inst, pm.box);
  if (!options.tight_big_m) {
    for (std::size_t f = 0; f < pm.big_m.size(); ++f) {
      if (inst.big_m_fallback < pm.big_m[f]) {
        throw InputError("big_m " + std::to_string(inst.big_m_fallback) +
                         " is below the " + std::to_string(pm.big_m[f]) +
                         " required by facet " + std::to_string(f + 1));
      }
      pm.big_m[f] = inst.big_m_fallback;
    }
  }
  pm.sets = inbound_indices(inst, pm.box);
  pm.bounds = zonotope_bounds(inst.reach_set);
  pm.sets = prune_indices(inst, std::move(pm.sets), pm.bounds);
  pm.model = build_milp(inst, pm.sets, pm.bounds, pm.big_m,
                        BuildOptions{options.pruning});
  return pm;
}

Verdict verify(const ProblemInstance& inst, const VerifyOptions& options) {
  Verdict verdict;
  PreparedModel pm;
  try {
    pm = prepare_model(inst, options);
  } catch (const NumericalError& e) {
    verdict.reason = LimitReason::kNumericalFailure;
    verdict.detail = e.what();
    return verdict;
  }
  verdict.model_variables = pm.model.num_variables();
  verdict.model_constraints = pm.model.constraints().size();

  SearchResult search = milp_feasible(pm.model, inst.limits, options.tol);
  verdict.stats = search.stats;
  switch (search.status) {
    case SearchStatus::kInfeasible:
      verdict.status = VerdictStatus::kRobust;
      return verdict;
    case SearchStatus::kResourceLimit:
      verdict.status = VerdictStatus::kInconclusive;
      verdict.reason = search.reason;
      verdict.detail = search.detail;
      return verdict;
    case SearchStatus::kFeasible:
      break;
  }

  try {
    Counterexample cex = decode_counterexample(inst, pm.model, search.assignment);
    if (!cex.validated) {
      verdict.status = VerdictStatus::kInconclusive;
      verdict.reason = LimitReason::kNumericalFailure;
      verdict.detail = "decoded counterexample does not validate";
      verdict.rejected_witness = cex.report;
      return verdict;
    }
    verdict.status = VerdictStatus::kUnknown;
    verdict.counterexample = std::move(cex);
  } catch (const NumericalError& e) {
    verdict.status = VerdictStatus::kInconclusive;
    verdict.reason = LimitReason::kNumericalFailure;
    verdict.detail = e.what();
  }
  return verdict;
}

}  // namespace kpcert
