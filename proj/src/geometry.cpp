#include "kpcert/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kpcert/error.hpp"

namespace kpcert {
namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

Grid::Grid(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InputError("grid data has " + std::to_string(data_.size()) +
                     " entries, expected " + std::to_string(rows_ * cols_));
  }
}

Zonotope::Zonotope(std::size_t height, std::size_t width, Grid center,
                   std::vector<Grid> generators)
    : height_(height),
      width_(width),
      center_(std::move(center)),
      generators_(std::move(generators)) {
  if (height_ == 0 || width_ == 0 || center_.cols() == 0) {
    throw InputError("zonotope dimensions must be positive");
  }
  if (center_.rows() != height_ * width_) {
    throw InputError("zonotope center has " + std::to_string(center_.rows()) +
                     " rows, expected H*W = " +
                     std::to_string(height_ * width_));
  }
  if (!all_finite(center_.values())) {
    throw InputError("zonotope center has non-finite entries");
  }
  for (std::size_t k = 0; k < generators_.size(); ++k) {
    if (!generators_[k].same_shape(center_)) {
      throw InputError("generator " + std::to_string(k) +
                       " does not match the center's shape");
    }
    if (!all_finite(generators_[k].values())) {
      throw InputError("generator " + std::to_string(k) +
                       " has non-finite entries");
    }
  }
}

HPolytope::HPolytope(std::size_t dim, std::vector<std::vector<double>> a,
                     std::vector<double> b)
    : dim_(dim), a_(std::move(a)), b_(std::move(b)) {
  if (dim_ == 0) throw InputError("polytope dimension must be positive");
  if (a_.empty()) throw InputError("polytope needs at least one facet");
  if (a_.size() != b_.size()) {
    throw InputError("polytope has " + std::to_string(a_.size()) +
                     " rows in P but " + std::to_string(b_.size()) +
                     " entries in b");
  }
  for (const auto& row : a_) {
    if (row.size() != dim_) {
      throw InputError("polytope row has " + std::to_string(row.size()) +
                       " coefficients, expected " + std::to_string(dim_));
    }
    if (!all_finite(row)) throw InputError("polytope has non-finite entries");
  }
  if (!all_finite(b_)) throw InputError("polytope has non-finite entries");
}

double HPolytope::row_value(std::size_t facet, std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t t = 0; t < dim_; ++t) s += a_[facet][t] * x[t];
  return s;
}

double HPolytope::row_value(std::size_t facet, std::span<const int> x) const {
  double s = 0.0;
  for (std::size_t t = 0; t < dim_; ++t) s += a_[facet][t] * x[t];
  return s;
}

bool HPolytope::contains(std::span<const int> x) const {
  for (std::size_t i = 0; i < b_.size(); ++i) {
    if (row_value(i, x) > b_[i]) return false;
  }
  return true;
}

std::vector<std::size_t> HPolytope::violated_facets(
    std::span<const int> x) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b_.size(); ++i) {
    if (row_value(i, x) > b_[i]) out.push_back(i);
  }
  return out;
}

HPolytope HPolytope::with_facet(std::vector<double> row, double rhs) const {
  auto a = a_;
  auto b = b_;
  a.push_back(std::move(row));
  b.push_back(rhs);
  return HPolytope(dim_, std::move(a), std::move(b));
}

std::size_t IntegerBox::cardinality() const {
  std::size_t n = 1;
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  for (std::size_t t = 0; t < lower.size(); ++t) {
    auto width = static_cast<std::size_t>(upper[t] - lower[t] + 1);
    if (n > kMax / width) return kMax;
    n *= width;
  }
  return n;
}

BoundsMatrix zonotope_bounds(const Zonotope& z) {
  BoundsMatrix out{z.center(), z.center()};
  auto lo = out.lower.values();
  auto hi = out.upper.values();
  for (const auto& g : z.generators()) {
    auto gv = g.values();
    for (std::size_t e = 0; e < gv.size(); ++e) {
      lo[e] -= std::abs(gv[e]);
      hi[e] += std::abs(gv[e]);
    }
  }
  return out;
}

Grid sample_zonotope(const Zonotope& z, std::span<const double> alpha) {
  if (alpha.size() != z.num_generators()) {
    throw InputError("alpha has " + std::to_string(alpha.size()) +
                     " entries, zonotope has " +
                     std::to_string(z.num_generators()) + " generators");
  }
  Grid out = z.center();
  auto v = out.values();
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (!(std::abs(alpha[k]) <= 1.0)) {
      throw InputError("alpha[" + std::to_string(k) + "] = " +
                       std::to_string(alpha[k]) + " lies outside [-1, 1]");
    }
    if (alpha[k] == 0.0) continue;
    auto gv = z.generator(k).values();
    for (std::size_t e = 0; e < v.size(); ++e) v[e] += alpha[k] * gv[e];
  }
  return out;
}

Zonotope hull_to_zonotope(std::span<const Grid> vertices, std::size_t height,
                          std::size_t width, HullMethod method) {
  if (vertices.empty()) throw InputError("convex hull needs at least one vertex");
  const Grid& base = vertices.front();
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    if (!vertices[i].same_shape(base)) {
      throw InputError("hull vertex " + std::to_string(i) + " has shape " +
                       std::to_string(vertices[i].rows()) + "x" +
                       std::to_string(vertices[i].cols()) + ", expected " +
                       std::to_string(base.rows()) + "x" +
                       std::to_string(base.cols()));
    }
  }

  if (method == HullMethod::kInterval) {
    Grid lo = base;
    Grid hi = base;
    for (const auto& v : vertices) {
      for (std::size_t e = 0; e < v.size(); ++e) {
        lo.values()[e] = std::min(lo.values()[e], v.values()[e]);
        hi.values()[e] = std::max(hi.values()[e], v.values()[e]);
      }
    }
    Grid center(base.rows(), base.cols());
    std::vector<Grid> gens;
    for (std::size_t e = 0; e < base.size(); ++e) {
      center.values()[e] = 0.5 * (lo.values()[e] + hi.values()[e]);
      double radius = 0.5 * (hi.values()[e] - lo.values()[e]);
      if (radius > 0.0) {
        Grid g(base.rows(), base.cols());
        g.values()[e] = radius;
        gens.push_back(std::move(g));
      }
    }
    return Zonotope(height, width, std::move(center), std::move(gens));
  }

  // Every hull point X_0 + sum_i w_i (X_i - X_0) with w_i >= 0, sum w_i <= 1
  // is reached with beta_i = 2 w_i - 1.
  Grid center = base;
  std::vector<Grid> gens;
  gens.reserve(vertices.size() - 1);
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    Grid g(base.rows(), base.cols());
    for (std::size_t e = 0; e < base.size(); ++e) {
      g.values()[e] = 0.5 * (vertices[i].values()[e] - base.values()[e]);
      center.values()[e] += g.values()[e];
    }
    gens.push_back(std::move(g));
  }
  return Zonotope(height, width, std::move(center), std::move(gens));
}

}  // namespace kpcert
