#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "kpcert/error.hpp"
#include "kpcert/instance.hpp"
#include "support/fixtures.hpp"

namespace kpcert {
namespace {

ProblemInstance grid_instance(std::size_t h, std::size_t w, std::vector<int> gt,
                              HPolytope poly) {
  ProblemInstance inst;
  inst.height = h;
  inst.width = w;
  inst.keypoints = gt.size() / 2;
  inst.ground_truth = std::move(gt);
  inst.reach_set = Zonotope(h, w, Grid(h * w, inst.keypoints), {});
  inst.deviation_polytope = std::move(poly);
  return inst;
}

// Calls f on every integer point of the box.
template <class F>
void for_each_point(const IntegerBox& box, F&& f) {
  std::vector<int> x = box.lower;
  if (box.cardinality() == 0) return;
  while (true) {
    f(x);
    std::size_t t = x.size();
    while (t > 0) {
      --t;
      if (++x[t] <= box.upper[t]) break;
      x[t] = box.lower[t];
      if (t == 0) return;
    }
  }
}

TEST(DeviationBox, Examples) {
  auto a = grid_instance(5, 4, {3, 2}, HPolytope(2, {{1, 0}}, {0}));
  auto box = deviation_box(a);
  EXPECT_EQ(box.lower, (std::vector<int>{-2, -1}));
  EXPECT_EQ(box.upper, (std::vector<int>{2, 2}));

  auto b = grid_instance(1, 1, {1, 1}, HPolytope(2, {{1, 0}}, {0}));
  EXPECT_EQ(deviation_box(b).lower, (std::vector<int>{0, 0}));
  EXPECT_EQ(deviation_box(b).upper, (std::vector<int>{0, 0}));
}

TEST(DeviationBox, CoversExactlyInImageCoordinates) {
  auto inst = grid_instance(5, 4, {3, 2}, HPolytope(2, {{1, 0}}, {0}));
  auto box = deviation_box(inst);
  std::set<std::pair<int, int>> seen;
  for_each_point(box, [&](const std::vector<int>& d) {
    seen.insert({3 + d[0], 2 + d[1]});
  });
  EXPECT_EQ(seen.size(), 20u);
  for (auto [r, c] : seen) {
    EXPECT_TRUE(r >= 1 && r <= 5 && c >= 1 && c <= 4);
  }
}

TEST(BigM, ZeroRowGivesEpsilon) {
  auto inst = grid_instance(3, 3, {2, 2}, HPolytope(2, {{0, 0}}, {0}));
  auto m = big_m_vector(inst, deviation_box(inst));
  EXPECT_DOUBLE_EQ(m[0], 1e-6);
}

TEST(BigM, MatchesBoxEnumeration) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> coef(-4, 4);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<double>> a(3, std::vector<double>(4));
    std::vector<double> b(3);
    for (auto& row : a) for (auto& v : row) v = coef(rng);
    for (auto& v : b) v = coef(rng);
    auto inst = grid_instance(4, 3, {2, 3, 4, 1}, HPolytope(4, a, b));
    auto box = deviation_box(inst);
    auto m = big_m_vector(inst, box);
    std::vector<double> brute(3, -1e300);
    for_each_point(box, [&](const std::vector<int>& d) {
      for (std::size_t f = 0; f < 3; ++f) {
        double s = b[f] + inst.epsilon;
        for (std::size_t k = 0; k < 4; ++k) s -= a[f][k] * d[k];
        brute[f] = std::max(brute[f], s);
      }
    });
    for (std::size_t f = 0; f < 3; ++f) EXPECT_NEAR(m[f], brute[f], 1e-12);
  }
}

TEST(Inbound, WholeBoxKeepsEveryPixel) {
  auto inst = grid_instance(3, 4, {2, 2, 3, 4},
                            HPolytope(4, {{1, 0, 0, 0}}, {100}));
  auto sets = inbound_indices(inst, deviation_box(inst));
  for (const auto& s : sets) EXPECT_EQ(s.in_bound.size(), 12u);
}

TEST(Inbound, EmptyProjectionIsAnInputError) {
  auto inst = grid_instance(3, 3, {2, 2}, HPolytope(2, {{1, 0}}, {-5}));
  EXPECT_THROW(inbound_indices(inst, deviation_box(inst)), InputError);
}

// Integer projection by brute force; equal to the LP projection when the
// polytope rows are unit vectors (integral vertices), a subset otherwise.
std::vector<std::set<int>> integer_projection(const ProblemInstance& inst) {
  std::vector<std::set<int>> out(inst.keypoints);
  for_each_point(deviation_box(inst), [&](const std::vector<int>& d) {
    if (!inst.deviation_polytope.contains(d)) return;
    for (std::size_t i = 0; i < inst.keypoints; ++i) {
      out[i].insert(flat_index(inst.ground_truth[2 * i] + d[2 * i],
                               inst.ground_truth[2 * i + 1] + d[2 * i + 1], inst.width));
    }
  });
  return out;
}

TEST(Inbound, MatchesIntegerProjection) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> coef(-2, 2);
  std::uniform_int_distribution<int> rhs(0, 3);
  std::uniform_int_distribution<int> pos(1, 3);
  for (int t = 0; t < 60; ++t) {
    const bool integral = t % 2 == 0;
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (int f = 0; f < 3; ++f) {
      std::vector<double> row(4, 0.0);
      if (integral) {
        row[static_cast<std::size_t>(f + t) % 4] = coef(rng) >= 0 ? 1.0 : -1.0;
      } else {
        for (auto& v : row) v = coef(rng);
      }
      a.push_back(row);
      b.push_back(rhs(rng));
    }
    auto inst = grid_instance(3, 3, {pos(rng), pos(rng), pos(rng), pos(rng)},
                              HPolytope(4, a, b));
    auto sets = inbound_indices(inst, deviation_box(inst));
    auto brute = integer_projection(inst);
    for (std::size_t i = 0; i < 2; ++i) {
      std::set<int> lp(sets[i].in_bound.begin(), sets[i].in_bound.end());
      EXPECT_TRUE(std::includes(lp.begin(), lp.end(), brute[i].begin(), brute[i].end()));
      if (integral) {
        EXPECT_EQ(lp, brute[i]) << "trial " << t << " keypoint " << i;
      }
    }
  }
}

TEST(Inbound, ExampleCoupledRegion) {
  // Second keypoint choices for each fixed first-keypoint deviation.
  const HPolytope poly = testing::example_polytope();
  auto allowed = [&](int h1, int w1) {
    std::set<std::pair<int, int>> out;
    for (int h2 = 0; h2 <= 2; ++h2) {
      for (int w2 = 0; w2 <= 2; ++w2) {
        std::vector<int> d{h1, w1, h2, w2};
        if (poly.contains(d)) out.insert({h2, w2});
      }
    }
    return out;
  };
  using S = std::set<std::pair<int, int>>;
  EXPECT_EQ(allowed(-1, -1),
            (S{{0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 1}}));
  EXPECT_EQ(allowed(-1, 0), (S{{0, 0}, {0, 1}, {1, 0}, {0, 2}, {1, 1}, {2, 0}}));
  EXPECT_EQ(allowed(0, 0), (S{{0, 0}, {0, 1}, {1, 0}}));
  EXPECT_EQ(allowed(1, 0), (S{{0, 0}}));
  EXPECT_TRUE(allowed(1, 1).empty());
}

TEST(Inbound, MonotoneUnderExtraFacets) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> coef(-2, 2);
  for (int t = 0; t < 30; ++t) {
    auto inst = grid_instance(3, 3, {2, 2, 1, 1}, testing::example_polytope());
    auto before = inbound_indices(inst, deviation_box(inst));
    std::vector<double> row(4);
    for (auto& v : row) v = coef(rng);
    inst.deviation_polytope = inst.deviation_polytope.with_facet(row, 1.0);
    IndexSets after;
    try {
      after = inbound_indices(inst, deviation_box(inst));
    } catch (const InputError&) {
      continue;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_TRUE(std::includes(before[i].in_bound.begin(), before[i].in_bound.end(),
                                after[i].in_bound.begin(), after[i].in_bound.end()));
    }
  }
}

TEST(Prune, NoDominanceKeepsEverything) {
  auto inst = grid_instance(2, 2, {1, 1}, HPolytope(2, {{1, 1}}, {1}));
  Grid g(4, 1, 1.0);
  inst.reach_set = Zonotope(2, 2, Grid(4, 1, 0.0), {g});
  auto sets = inbound_indices(inst, deviation_box(inst));
  auto bounds = zonotope_bounds(inst.reach_set);
  auto pruned = prune_indices(inst, sets, bounds);
  EXPECT_EQ(pruned[0].pruned_in, pruned[0].in_bound);
  EXPECT_EQ(pruned[0].out_candidates, (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(pruned[0].pruned_out, (std::vector<int>{1, 2, 3, 4}));
}

TEST(Prune, EqualConstantsKeepTheLowestIndex) {
  auto inst = grid_instance(2, 2, {1, 1}, HPolytope(2, {{1, 1}}, {2}));
  auto sets = inbound_indices(inst, deviation_box(inst));
  auto pruned = prune_indices(inst, sets, zonotope_bounds(inst.reach_set));
  EXPECT_EQ(pruned[0].pruned_in, std::vector<int>{1});
  EXPECT_EQ(pruned[0].pruned_out, std::vector<int>{1});
}

TEST(Prune, DominatedPixelsNeverStrictlyWin) {
  std::mt19937_64 rng(24);
  testing::RandomInstanceOptions opt;
  opt.max_box = 400;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 40; ++t) {
    auto inst = testing::random_instance(rng, opt);
    auto bounds = zonotope_bounds(inst.reach_set);
    auto sets = prune_indices(inst, inbound_indices(inst, deviation_box(inst)), bounds);
    for (int s = 0; s < 50; ++s) {
      std::vector<double> alpha(inst.reach_set.num_generators());
      for (auto& a : alpha) a = u(rng);
      Grid z = sample_zonotope(inst.reach_set, alpha);
      for (std::size_t i = 0; i < inst.keypoints; ++i) {
        double best_kept = -1e300;
        for (int j : sets[i].pruned_out) best_kept = std::max(best_kept, z(j - 1, i));
        for (int j = 1; j <= static_cast<int>(inst.pixels()); ++j) {
          EXPECT_LE(z(j - 1, i), best_kept + 1e-12);
        }
      }
    }
  }
}

}  // namespace
}  // namespace kpcert
