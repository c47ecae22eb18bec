#include "kpcert/instance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kpcert/error.hpp"
#include "kpcert/lp.hpp"

namespace kpcert {

void ProblemInstance::validate() const {
  if (height == 0 || width == 0 || keypoints == 0) {
    throw InputError("instance dimensions h, w, k must be positive");
  }
  if (ground_truth.size() != 2 * keypoints) {
    throw InputError("ground_truth has " + std::to_string(ground_truth.size()) +
                     " entries, expected 2K = " + std::to_string(2 * keypoints));
  }
  for (std::size_t i = 0; i < keypoints; ++i) {
    int r = ground_truth[2 * i];
    int c = ground_truth[2 * i + 1];
    if (r < 1 || r > static_cast<int>(height) || c < 1 ||
        c > static_cast<int>(width)) {
      throw InputError("keypoint " + std::to_string(i + 1) + " at (" +
                       std::to_string(r) + ", " + std::to_string(c) +
                       ") lies outside the " + std::to_string(height) + "x" +
                       std::to_string(width) + " image");
    }
  }
  if (reach_set.height() != height || reach_set.width() != width ||
      reach_set.channels() != keypoints) {
    throw InputError("zonotope shape " + std::to_string(reach_set.height()) +
                     "x" + std::to_string(reach_set.width()) + "x" +
                     std::to_string(reach_set.channels()) +
                     " does not match instance " + std::to_string(height) +
                     "x" + std::to_string(width) + "x" +
                     std::to_string(keypoints));
  }
  if (deviation_polytope.dim() != 2 * keypoints) {
    throw InputError("deviation polytope has dimension " +
                     std::to_string(deviation_polytope.dim()) +
                     ", expected 2K = " + std::to_string(2 * keypoints));
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InputError("epsilon must be a positive finite number");
  }
  if (!(big_m_fallback > 0.0) || !std::isfinite(big_m_fallback)) {
    throw InputError("big_m must be a positive finite number");
  }
  if (seed_heatmap && !seed_heatmap->same_shape(reach_set.center())) {
    throw InputError("seed heatmap shape does not match the zonotope");
  }
}

IntegerBox deviation_box(const ProblemInstance& inst) {
  IntegerBox box;
  const int h = static_cast<int>(inst.height);
  const int w = static_cast<int>(inst.width);
  for (std::size_t i = 0; i < inst.keypoints; ++i) {
    int r = inst.ground_truth[2 * i];
    int c = inst.ground_truth[2 * i + 1];
    box.lower.push_back(-(r - 1));
    box.upper.push_back(h - r);
    box.lower.push_back(-(c - 1));
    box.upper.push_back(w - c);
  }
  return box;
}

std::vector<double> big_m_vector(const ProblemInstance& inst,
                                 const IntegerBox& box) {
  const auto& poly = inst.deviation_polytope;
  std::vector<double> m(poly.num_facets());
  for (std::size_t i = 0; i < poly.num_facets(); ++i) {
    double v = poly.b()[i] + inst.epsilon;
    for (std::size_t t = 0; t < poly.dim(); ++t) {
      double p = poly.a()[i][t];
      v += std::max(-p * box.lower[t], -p * box.upper[t]);
    }
    m[i] = v;
  }
  return m;
}

IndexSets inbound_indices(const ProblemInstance& inst, const IntegerBox& box) {
  const auto& poly = inst.deviation_polytope;
  const std::size_t d = poly.dim();

  lp::LpProblem base;
  for (std::size_t t = 0; t < d; ++t) base.add_variable(box.lower[t], box.upper[t]);
  for (std::size_t f = 0; f < poly.num_facets(); ++f) {
    std::vector<lp::Term> terms;
    for (std::size_t t = 0; t < d; ++t) {
      if (poly.a()[f][t] != 0.0) terms.push_back({t, poly.a()[f][t]});
    }
    base.add_row(std::move(terms), lp::Relation::kLessEqual, poly.b()[f]);
  }

  IndexSets sets(inst.keypoints);
  for (std::size_t i = 0; i < inst.keypoints; ++i) {
    const std::size_t tr = 2 * i;
    const std::size_t tc = 2 * i + 1;
    for (int a = box.lower[tr]; a <= box.upper[tr]; ++a) {
      for (int b = box.lower[tc]; b <= box.upper[tc]; ++b) {
        lp::LpProblem p = base;
        p.lower[tr] = p.upper[tr] = a;
        p.lower[tc] = p.upper[tc] = b;
        lp::LpOutcome out = lp::lp_solve(p);
        if (out.status == lp::LpStatus::kNumericalFailure) {
          throw NumericalError("projection LP for keypoint " +
                               std::to_string(i + 1) + " failed: " + out.detail);
        }
        if (out.status == lp::LpStatus::kOptimal) {
          sets[i].in_bound.push_back(flat_index(inst.ground_truth[tr] + a,
                                                inst.ground_truth[tc] + b,
                                                inst.width));
        }
      }
    }
    std::sort(sets[i].in_bound.begin(), sets[i].in_bound.end());
    if (sets[i].in_bound.empty()) {
      throw InputError("the deviation polytope admits no in-image deviation "
                       "for keypoint " + std::to_string(i + 1));
    }
  }
  return sets;
}

bool dominates(const BoundsMatrix& bounds, std::size_t channel, int by, int j) {
  if (by == j) return false;
  const double lo_by = bounds.lower(by - 1, channel);
  const double hi_j = bounds.upper(j - 1, channel);
  if (lo_by < hi_j) return false;
  const bool mutual = bounds.lower(j - 1, channel) >= bounds.upper(by - 1, channel);
  return !mutual || by < j;
}

IndexSets prune_indices(const ProblemInstance& inst, IndexSets sets,
                        const BoundsMatrix& bounds) {
  const int hw = static_cast<int>(inst.pixels());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    auto& s = sets[i];
    const auto& in = s.in_bound;
    auto dominated_by_in = [&](int j) {
      return std::any_of(in.begin(), in.end(),
                         [&](int by) { return dominates(bounds, i, by, j); });
    };

    std::vector<int> dominated_in;
    s.pruned_in.clear();
    for (int j : in) {
      (dominated_by_in(j) ? dominated_in : s.pruned_in).push_back(j);
    }
    s.out_candidates.clear();
    for (int j = 1; j <= hw; ++j) {
      if (!std::binary_search(dominated_in.begin(), dominated_in.end(), j)) {
        s.out_candidates.push_back(j);
      }
    }
    s.pruned_out.clear();
    for (int j : s.out_candidates) {
      if (!dominated_by_in(j)) s.pruned_out.push_back(j);
    }
  }
  return sets;
}

}  // namespace kpcert
