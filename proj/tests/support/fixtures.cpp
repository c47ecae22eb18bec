#include "fixtures.hpp"

#include <algorithm>
#include <cmath>

namespace kpcert::testing {

HPolytope example_polytope() {
  return HPolytope(4, {{1, 1, 1, 1}, {-1, -1, -1, -1}}, {1, 1});
}

std::vector<int> example_ground_truth() { return {2, 2, 1, 1}; }

namespace {

Grid two_channel(const std::vector<double>& ch1, const std::vector<double>& ch2) {
  Grid g(ch1.size(), 2);
  for (std::size_t j = 0; j < ch1.size(); ++j) {
    g(j, 0) = ch1[j];
    g(j, 1) = ch2[j];
  }
  return g;
}

ProblemInstance walkthrough_instance(Grid generator) {
  ProblemInstance inst;
  inst.height = 3;
  inst.width = 3;
  inst.keypoints = 2;
  inst.ground_truth = example_ground_truth();
  Grid center = two_channel({-5, -5, -5, -5, 0, -5, -5, -5, -5},
                            {0.1, -5, -5, -5, -5, -5, -5, -5, -5});
  inst.reach_set = Zonotope(3, 3, std::move(center), {std::move(generator)});
  inst.deviation_polytope = example_polytope();
  inst.epsilon = 1e-6;
  return inst;
}

}  // namespace

ProblemInstance walkthrough_scenario1() {
  return walkthrough_instance(
      two_channel({-0.1, -0.1, -0.1, -0.1, 2.0, -0.1, -0.1, -0.1, -0.1},
                  {1.0, -0.1, -0.1, -0.1, -0.1, -0.1, -0.1, -0.1, -0.1}));
}

ProblemInstance walkthrough_scenario2() {
  return walkthrough_instance(
      two_channel({-0.1, -0.1, -0.1, -0.1, 2.0, -0.1, -0.1, -0.1, 8.0},
                  {1.0, -0.1, -0.1, -0.1, -0.1, -0.1, -0.1, -0.1, 8.0}));
}

ProblemInstance random_instance(std::mt19937_64& rng,
                                const RandomInstanceOptions& options) {
  auto uint = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto real = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  ProblemInstance inst;
  IntegerBox box;
  do {
    inst.height = uint(2, options.max_side);
    inst.width = uint(2, options.max_side);
    inst.keypoints = uint(1, options.max_keypoints);
    inst.ground_truth.clear();
    for (std::size_t i = 0; i < inst.keypoints; ++i) {
      inst.ground_truth.push_back(static_cast<int>(uint(1, inst.height)));
      inst.ground_truth.push_back(static_cast<int>(uint(1, inst.width)));
    }
    box.lower.clear();
    box.upper.clear();
    for (std::size_t t = 0; t < inst.ground_truth.size(); ++t) {
      int extent = static_cast<int>(t % 2 == 0 ? inst.height : inst.width);
      box.lower.push_back(1 - inst.ground_truth[t]);
      box.upper.push_back(extent - inst.ground_truth[t]);
    }
  } while (box.cardinality() > options.max_box);

  const std::size_t hw = inst.height * inst.width;
  const std::size_t k = inst.keypoints;
  const std::size_t m = options.fixed_generators != 0
                            ? options.fixed_generators
                            : uint(0, options.max_generators);

  Grid center(hw, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < hw; ++j) center(j, i) = real(-1.0, 1.0);
    int gt = flat_index(inst.ground_truth[2 * i], inst.ground_truth[2 * i + 1],
                        inst.width);
    center(gt - 1, i) += real(0.0, 3.0);
  }
  std::vector<Grid> gens;
  for (std::size_t g = 0; g < m; ++g) {
    Grid gen(hw, k);
    double scale = real(0.1, 1.5);
    double density = real(0.2, 1.0);
    for (auto& v : gen.values()) {
      if (real(0.0, 1.0) < density) v = scale * real(-1.0, 1.0);
    }
    gens.push_back(std::move(gen));
  }
  inst.reach_set = Zonotope(inst.height, inst.width, std::move(center), std::move(gens));

  const std::size_t d = 2 * k;
  const std::size_t facets = uint(1, options.max_facets);
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  for (std::size_t f = 0; f < facets; ++f) {
    std::vector<double> row(d, 0.0);
    bool nonzero = false;
    while (!nonzero) {
      for (auto& v : row) {
        v = static_cast<double>(static_cast<int>(uint(0, 4)) - 2);
        nonzero = nonzero || v != 0.0;
      }
    }
    a.push_back(std::move(row));
    b.push_back(static_cast<double>(uint(0, 3)));
  }
  inst.deviation_polytope = HPolytope(d, std::move(a), std::move(b));
  inst.limits.max_nodes = 200'000;
  inst.limits.time_budget_s = 60.0;
  return inst;
}

}  // namespace kpcert::testing

namespace kpcert::testing {

RandomNetwork random_network(std::mt19937_64& rng, bool affine_only) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  RandomNetwork out;
  std::vector<Layer> layers;
  if (pick(0, 1) == 0) {
    // dense: flatten -> dense -> relu -> dense -> reshape
    out.input = {pick(2, 4), pick(2, 4), pick(1, 2)};
    const std::size_t hidden = pick(4, 16);
    const Shape heat{pick(2, 3), pick(2, 3), pick(1, 2)};
    auto dense = [&](std::size_t in, std::size_t o) {
      DenseLayer d;
      d.weights.assign(o, std::vector<double>(in));
      for (auto& row : d.weights) for (auto& w : row) w = u(rng);
      d.bias.resize(o);
      for (auto& b : d.bias) b = 0.5 * u(rng);
      return d;
    };
    layers.push_back(FlattenLayer{});
    layers.push_back(dense(out.input.size(), hidden));
    if (!affine_only) layers.push_back(ReluLayer{});
    layers.push_back(dense(hidden, heat.size()));
    layers.push_back(ReshapeLayer{heat});
  } else {
    // conv -> relu -> conv
    out.input = {pick(4, 6), pick(4, 6), pick(1, 2)};
    auto conv = [&](std::size_t in_ch, std::size_t out_ch, std::size_t k,
                    std::size_t stride, std::size_t pad) {
      Conv2DLayer c;
      c.kernel.assign(out_ch, std::vector<std::vector<std::vector<double>>>(
                                  in_ch, std::vector<std::vector<double>>(
                                             k, std::vector<double>(k))));
      for (auto& a : c.kernel)
        for (auto& b : a)
          for (auto& row : b)
            for (auto& w : row) w = u(rng);
      c.bias.resize(out_ch);
      for (auto& b : c.bias) b = 0.5 * u(rng);
      c.stride = stride;
      c.pad = pad;
      return c;
    };
    const std::size_t mid = pick(2, 3);
    layers.push_back(conv(out.input.c, mid, 3, 1, pick(0, 1)));
    if (!affine_only) layers.push_back(ReluLayer{});
    layers.push_back(conv(mid, pick(1, 2), 2, pick(1, 2), 0));
  }
  out.net = Network(std::move(layers));
  return out;
}

Zonotope random_input_set(std::mt19937_64& rng, Shape input, std::size_t vertices) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Grid> verts;
  Grid seed(input.h * input.w, input.c);
  for (auto& v : seed.values()) v = u(rng);
  verts.push_back(seed);
  for (std::size_t n = 1; n < vertices; ++n) {
    Grid g = seed;
    for (auto& v : g.values()) v += 0.2 * (u(rng) - 0.5);
    verts.push_back(std::move(g));
  }
  return hull_to_zonotope(verts, input.h, input.w);
}

}  // namespace kpcert::testing
