#include "kpcert/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "kpcert/encode.hpp"
#include "kpcert/error.hpp"

namespace kpcert {

const char* to_string(OracleMethod method) {
  switch (method) {
    case OracleMethod::kEnumeration: return "enumeration";
    case OracleMethod::kSampling: return "sampling";
    case OracleMethod::kAlphaGrid: return "alpha-grid";
  }
  return "?";
}

const char* to_string(OracleOutcome outcome) {
  return outcome == OracleOutcome::kCounterexampleFound ? "counterexample-found"
                                                        : "none-found";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

OracleReport enumerate_falsify(const ProblemInstance& inst,
                               const EnumerationOptions& options) {
  inst.validate();
  OracleReport report;
  report.method = OracleMethod::kEnumeration;

  const IntegerBox box = deviation_box(inst);
  if (box.cardinality() > options.cap) {
    throw InputError("deviation box has more than " + std::to_string(options.cap) +
                     " integer points; shrink the instance");
  }
  const IndexSets sets = inbound_indices(inst, box);
  const Zonotope& z = inst.reach_set;
  const std::size_t m = z.num_generators();
  const std::size_t k = inst.keypoints;
  const auto& poly = inst.deviation_polytope;

  std::vector<int> dv = box.lower;
  const std::size_t d = dv.size();
  while (true) {
    ++report.assignments_tried;
    if (!poly.contains(dv)) {
      // alpha in [-1,1]^m with Z_{j_i} >= Z_{j} for all in-bound j, expressed
      // directly through Z = C + G alpha.
      lp::LpProblem p;
      for (std::size_t g = 0; g < m; ++g) p.add_variable(-1.0, 1.0);
      bool trivially_false = false;
      for (std::size_t i = 0; i < k && !trivially_false; ++i) {
        const int ji = flat_index(inst.ground_truth[2 * i] + dv[2 * i],
                                  inst.ground_truth[2 * i + 1] + dv[2 * i + 1],
                                  inst.width);
        for (int j : sets[i].in_bound) {
          if (j == ji) continue;
          std::vector<lp::Term> terms;
          for (std::size_t g = 0; g < m; ++g) {
            double c = z.generator(g)(ji - 1, i) - z.generator(g)(j - 1, i);
            if (c != 0.0) terms.push_back({g, c});
          }
          double rhs = z.center()(j - 1, i) - z.center()(ji - 1, i);
          if (terms.empty() && rhs > options.lp.feas_tol) trivially_false = true;
          p.add_row(std::move(terms), lp::Relation::kGreaterEqual, rhs);
        }
      }
      if (!trivially_false) {
        lp::LpOutcome out = lp::lp_solve(p, options.lp);
        ++report.lp_calls;
        if (out.status == lp::LpStatus::kNumericalFailure) {
          throw NumericalError("enumeration LP failed: " + out.detail);
        }
        if (out.status == lp::LpStatus::kOptimal) {
          OracleWitness w;
          w.deviation = dv;
          for (double a : out.x) w.alpha.push_back(std::clamp(a, -1.0, 1.0));
          w.heatmaps = sample_zonotope(z, w.alpha);
          report.outcome = OracleOutcome::kCounterexampleFound;
          report.witness = std::move(w);
          return report;
        }
      }
    }
    std::size_t t = d;
    while (t > 0) {
      --t;
      if (++dv[t] <= box.upper[t]) break;
      dv[t] = box.lower[t];
      if (t == 0) return report;
    }
  }
}

namespace {

OracleReport check_alpha(const ProblemInstance& inst, std::span<const double> alpha,
                         OracleReport& report) {
  Grid heat = sample_zonotope(inst.reach_set, alpha);
  ValidationReport v = validate_heatmaps(inst, heat, 0.0);
  if (v.violates) {
    report.outcome = OracleOutcome::kCounterexampleFound;
    report.witness = OracleWitness{v.deviation, {alpha.begin(), alpha.end()},
                                   std::move(heat)};
  }
  return report;
}

}  // namespace

OracleReport sample_falsify(const ProblemInstance& inst, std::size_t n,
                            std::uint64_t seed) {
  inst.validate();
  if (n == 0) throw InputError("sample count must be at least 1");
  OracleReport report;
  report.method = OracleMethod::kSampling;
  report.seed = seed;
  const std::size_t m = inst.reach_set.num_generators();
  if (m == 0) n = 1;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> alpha(m);
  for (std::size_t s = 0; s < n; ++s) {
    for (auto& a : alpha) a = unit(rng);
    ++report.samples_drawn;
    check_alpha(inst, alpha, report);
    if (report.witness) break;
  }
  return report;
}

OracleReport grid_falsify(const ProblemInstance& inst, double step,
                          std::size_t cap) {
  inst.validate();
  if (!(step > 0.0) || step > 2.0) throw InputError("grid step must lie in (0, 2]");
  OracleReport report;
  report.method = OracleMethod::kAlphaGrid;
  const std::size_t m = inst.reach_set.num_generators();
  const auto per_dim = static_cast<std::size_t>(std::llround(2.0 / step)) + 1;
  double total = std::pow(double(per_dim), double(m));
  if (total > double(cap)) {
    throw InputError("alpha grid would need " + std::to_string(total) +
                     " points (cap " + std::to_string(cap) + ")");
  }
  std::vector<std::size_t> idx(m, 0);
  std::vector<double> alpha(m);
  while (true) {
    for (std::size_t g = 0; g < m; ++g) {
      alpha[g] = std::min(1.0, -1.0 + double(idx[g]) * step);
    }
    if (m > 0 && idx.back() == per_dim - 1) alpha.back() = 1.0;
    ++report.samples_drawn;
    check_alpha(inst, alpha, report);
    if (report.witness) return report;
    std::size_t g = m;
    bool done = true;
    while (g > 0) {
      --g;
      if (++idx[g] < per_dim) {
        done = false;
        break;
      }
      idx[g] = 0;
    }
    if (done) return report;
  }
}

double empirical_verified(std::span<const ProblemInstance> batch, std::size_t n,
                          std::uint64_t seed) {
  if (batch.empty()) throw InputError("empirical rate needs a nonempty batch");
  std::size_t clean = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto r = sample_falsify(batch[b], n, derive_seed(seed, b));
    if (r.outcome == OracleOutcome::kNoneFound) ++clean;
  }
  return double(clean) / double(batch.size());
}

}  // namespace kpcert
