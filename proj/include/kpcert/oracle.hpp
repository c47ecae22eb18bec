#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kpcert/geometry.hpp"
#include "kpcert/instance.hpp"
#include "kpcert/lp.hpp"

namespace kpcert {

// Independent falsifiers used to cross-check verdicts on small instances.

enum class OracleMethod { kEnumeration, kSampling, kAlphaGrid };
enum class OracleOutcome { kCounterexampleFound, kNoneFound };

const char* to_string(OracleMethod method);
const char* to_string(OracleOutcome outcome);

struct OracleWitness {
  std::vector<int> deviation;
  std::vector<double> alpha;
  Grid heatmaps;
};

struct OracleReport {
  OracleMethod method = OracleMethod::kEnumeration;
  OracleOutcome outcome = OracleOutcome::kNoneFound;
  std::optional<OracleWitness> witness;
  std::size_t assignments_tried = 0;
  std::size_t samples_drawn = 0;
  std::size_t lp_calls = 0;
  std::uint64_t seed = 0;
};

// Deterministic child seed for stream `index` of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct EnumerationOptions {
  std::size_t cap = 1'000'000;
  lp::LpOptions lp;
};

// Tries every integer deviation in the image box that leaves the polytope and
// asks one plain LP over alpha whether the heatmap values at the deviated
// keypoints can dominate every in-bound location of their channel. No
// binaries, no Big-M, no pruning. The lexicographically smallest violating
// deviation is reported. Throws InputError when the box exceeds `cap` and
// NumericalError when an LP fails.
OracleReport enumerate_falsify(const ProblemInstance& inst,
                               const EnumerationOptions& options = {});

// Draws `n` alpha vectors uniformly from [-1, 1]^m (one evaluation of the
// center when m = 0) and checks the adversarial argmax of each heatmap.
OracleReport sample_falsify(const ProblemInstance& inst, std::size_t n,
                            std::uint64_t seed);

// Sweeps alpha over a regular grid with the given step in every dimension.
// Throws InputError when the grid would exceed `cap` points.
OracleReport grid_falsify(const ProblemInstance& inst, double step = 1e-3,
                          std::size_t cap = 10'000'000);

// Fraction of instances on which sample_falsify finds no violation.
double empirical_verified(std::span<const ProblemInstance> batch, std::size_t n,
                          std::uint64_t seed);

}  // namespace kpcert
