#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kpcert/geometry.hpp"
#include "kpcert/instance.hpp"
#include "kpcert/lp.hpp"

namespace kpcert {

enum class VarKind { kContinuous, kBinary, kInteger };

// What a model variable stands for. Indices are 1-based; `j` is a generator,
// deviation component, facet, or flattened pixel depending on the role and
// `i` is the keypoint/channel where one applies.
enum class Role {
  kAlpha,      // alpha_j
  kHeatmap,    // Z_{j,i}
  kDeviation,  // dv_j
  kFacetFlag,  // r_j
  kIndicator,  // Delta_{j,i}
  kSelected,   // Zhat_{j,i}
  kExtracted,  // z_i
};

struct VarRole {
  Role role;
  int j = 0;
  int i = 0;
  friend bool operator==(const VarRole&, const VarRole&) = default;
};

struct Variable {
  VarKind kind;
  double lower;
  double upper;
  VarRole role;
};

struct Constraint {
  std::vector<lp::Term> terms;
  lp::Relation relation;
  double rhs;
  std::string label;
};

// A mixed-integer feasibility program with a total, injective role registry.
class MilpModel {
 public:
  std::size_t add_variable(VarKind kind, double lower, double upper, VarRole role);
  void add_constraint(std::vector<lp::Term> terms, lp::Relation relation,
                      double rhs, std::string label);

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  std::size_t num_variables() const { return variables_.size(); }

  std::optional<std::size_t> find(Role role, int j, int i = 0) const;
  // Throws std::out_of_range when the role is not registered.
  std::size_t at(Role role, int j, int i = 0) const;
  std::string name(std::size_t var) const;

  // LP relaxation with the given bounds (defaults to the declared ones).
  lp::LpProblem relaxation() const;
  lp::LpProblem relaxation(std::span<const double> lower,
                           std::span<const double> upper) const;

  // Largest violation of bounds, rows (scaled as in lp::max_violation) and
  // integrality of `x`.
  double max_violation(std::span<const double> x) const;

 private:
  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
  std::map<std::tuple<Role, int, int>, std::size_t> registry_;
};

struct BuildOptions {
  bool pruning = true;
};

// Falsification program: a heatmap in the zonotope whose per-channel values
// at the deviated keypoints dominate every in-bound location while the joint
// deviation leaves the polytope through at least one facet.
MilpModel build_milp(const ProblemInstance& inst, const IndexSets& sets,
                     const BoundsMatrix& bounds, std::span<const double> big_m,
                     const BuildOptions& options = {});

struct ChannelArgmax {
  double max_value = 0.0;
  std::vector<int> argmax;  // 1-based flattened indices within tolerance
};

struct ValidationReport {
  bool violates = false;
  std::vector<ChannelArgmax> channels;
  // Violating argmax selection (first in lexicographic order), if any.
  std::vector<int> deviation;
  std::vector<std::size_t> violated_facets;  // 1-based
};

// Checks whether some per-channel argmax selection of `heatmaps` (values
// within `tie_tol` of the channel maximum count as ties) yields a joint
// deviation outside the polytope.
ValidationReport validate_heatmaps(const ProblemInstance& inst,
                                   const Grid& heatmaps, double tie_tol);

struct Counterexample {
  std::vector<double> alpha;
  Grid heatmaps;
  std::vector<int> deviation;
  std::vector<int> facet_flags;
  std::vector<std::pair<int, int>> perturbed;  // 1-based (row, col)
  bool validated = false;
  ValidationReport report;
};

inline constexpr double kAssignmentTol = 1e-6;

ValidationReport validate_counterexample(const ProblemInstance& inst,
                                         const Counterexample& cex);

// Throws NumericalError if `assignment` violates the model beyond
// kAssignmentTol.
Counterexample decode_counterexample(const ProblemInstance& inst,
                                     const MilpModel& model,
                                     std::span<const double> assignment);

// CPLEX-LP style text dump with stable line ordering.
std::string export_lp(const MilpModel& model);

}  // namespace kpcert
