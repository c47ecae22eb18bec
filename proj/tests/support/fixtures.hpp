#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "kpcert/geometry.hpp"
#include "kpcert/instance.hpp"

namespace kpcert::testing {

// 3x3 grid, two keypoints at (2,2) and (1,1), deviation sum bounded by 1 in
// absolute value.
HPolytope example_polytope();
std::vector<int> example_ground_truth();

// Single-generator reach sets on the example geometry. The first keeps both
// argmaxes on the ground truth; the second lets pixel 9 win both channels
// near alpha = 1.
ProblemInstance walkthrough_scenario1();
ProblemInstance walkthrough_scenario2();

struct RandomInstanceOptions {
  std::size_t max_side = 5;
  std::size_t max_keypoints = 3;
  std::size_t max_generators = 3;
  std::size_t max_facets = 4;
  // Resample until the deviation box has at most this many integer points.
  std::size_t max_box = 4000;
  // Force exactly this many generators when nonzero.
  std::size_t fixed_generators = 0;
};

// Small instance whose polytope contains the zero deviation. Heatmaps have a
// bump at each ground-truth pixel of random height so both verdicts occur.
ProblemInstance random_instance(std::mt19937_64& rng,
                                const RandomInstanceOptions& options = {});

}  // namespace kpcert::testing

#include "kpcert/reach.hpp"

namespace kpcert::testing {

struct RandomNetwork {
  Network net;
  Shape input;
};

// Small dense or conv network; `affine_only` omits ReLU layers.
RandomNetwork random_network(std::mt19937_64& rng, bool affine_only);

// Random zonotope over the network input: a hull of a few random images.
Zonotope random_input_set(std::mt19937_64& rng, Shape input, std::size_t vertices);

}  // namespace kpcert::testing
