#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "kpcert/geometry.hpp"

namespace kpcert {

struct SolverLimits {
  std::size_t max_nodes = 1'000'000;
  double time_budget_s = 600.0;
  friend bool operator==(const SolverLimits&, const SolverLimits&) = default;
};

// One verification query: the reachable heatmap set of a detector over some
// input set, the ground-truth keypoints, and the admissible joint deviation
// polytope {dv : P dv <= b} over the 2K integer keypoint deviations.
struct ProblemInstance {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t keypoints = 0;
  // 1-based (row, col) per keypoint, flattened as [r1, c1, r2, c2, ...].
  std::vector<int> ground_truth;
  Zonotope reach_set;
  HPolytope deviation_polytope;
  // Slack turning "a_i dv > b_i" into "a_i dv >= b_i + epsilon".
  double epsilon = 1e-6;
  // Big-M used only when tightened per-facet constants are disabled.
  double big_m_fallback = 1e6;
  SolverLimits limits;
  // Heatmaps of the unperturbed input, when known. The clean-prediction
  // check falls back to the zonotope center otherwise.
  std::optional<Grid> seed_heatmap;

  std::size_t pixels() const { return height * width; }
  // Throws InputError describing the first violated invariant.
  void validate() const;

  friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

// Flattened pixel index convention: j = (h - 1) * W + w, 1-based.
inline int flat_index(int row, int col, std::size_t width) {
  return (row - 1) * static_cast<int>(width) + col;
}
inline std::pair<int, int> pixel_of(int j, std::size_t width) {
  const int w = static_cast<int>(width);
  return {(j - 1) / w + 1, (j - 1) % w + 1};
}

// Per-keypoint index sets, all sorted ascending, 1-based flattened indices.
struct KeypointIndexSets {
  std::vector<int> in_bound;        // projection of the deviation polytope
  std::vector<int> pruned_in;       // in_bound minus dominated indices
  std::vector<int> out_candidates;  // all pixels minus dominated in-bound ones
  std::vector<int> pruned_out;      // out_candidates minus dominated indices
  friend bool operator==(const KeypointIndexSets&,
                         const KeypointIndexSets&) = default;
};

using IndexSets = std::vector<KeypointIndexSets>;

// Deviations keeping every keypoint inside the image.
IntegerBox deviation_box(const ProblemInstance& inst);

// Tightened Big-M: M_i = max over the box of [-P dv + b + eps]_i.
std::vector<double> big_m_vector(const ProblemInstance& inst,
                                 const IntegerBox& box);

// Fills `in_bound` for every keypoint: integer pairs (a, b) of the keypoint's
// box slice for which {P dv <= b, dv in box, (dv_2i-1, dv_2i) = (a, b)} is
// LP-feasible. Throws InputError when a keypoint has no in-bound pixel and
// NumericalError when a projection LP fails.
IndexSets inbound_indices(const ProblemInstance& inst, const IntegerBox& box);

// True when pixel `by` dominates pixel `j` in channel `channel`:
// lower(by) >= upper(j). Two constant pixels with equal value dominate each
// other; only the lower index is kept as the dominator in that case.
bool dominates(const BoundsMatrix& bounds, std::size_t channel, int by, int j);

// Fills the pruned and out-candidate sets from the populated in-bound sets.
IndexSets prune_indices(const ProblemInstance& inst, IndexSets sets,
                        const BoundsMatrix& bounds);

}  // namespace kpcert
