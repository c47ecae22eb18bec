#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kpcert {

// Dense row-major real matrix. Heatmap stacks use rows = H*W flattened pixels
// and cols = K channels; images use rows = H*W and cols = colour channels.
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Z = { C + sum_k alpha_k G_k : alpha in [-1,1]^m } over an H x W x K grid.
// Each generator is a full HW x K slab scaled by a single coefficient.
class Zonotope {
 public:
  Zonotope() = default;
  // Throws InputError on shape mismatch or non-finite entries.
  Zonotope(std::size_t height, std::size_t width, Grid center,
           std::vector<Grid> generators);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t channels() const { return center_.cols(); }
  std::size_t num_generators() const { return generators_.size(); }

  const Grid& center() const { return center_; }
  const std::vector<Grid>& generators() const { return generators_; }
  const Grid& generator(std::size_t k) const { return generators_[k]; }

  friend bool operator==(const Zonotope&, const Zonotope&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  Grid center_;
  std::vector<Grid> generators_;
};

// { x : A x <= b }, A stored row-major (rows x dim).
class HPolytope {
 public:
  HPolytope() = default;
  HPolytope(std::size_t dim, std::vector<std::vector<double>> a,
            std::vector<double> b);

  std::size_t dim() const { return dim_; }
  std::size_t num_facets() const { return b_.size(); }
  const std::vector<std::vector<double>>& a() const { return a_; }
  const std::vector<double>& b() const { return b_; }

  double row_value(std::size_t facet, std::span<const double> x) const;
  double row_value(std::size_t facet, std::span<const int> x) const;
  bool contains(std::span<const int> x) const;
  // 0-based indices of facets with a_i x > b_i.
  std::vector<std::size_t> violated_facets(std::span<const int> x) const;

  // Intersection with extra halfspaces.
  HPolytope with_facet(std::vector<double> row, double rhs) const;

  friend bool operator==(const HPolytope&, const HPolytope&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> a_;
  std::vector<double> b_;
};

struct IntegerBox {
  std::vector<int> lower;
  std::vector<int> upper;

  std::size_t dim() const { return lower.size(); }
  // Number of integer points; saturates at SIZE_MAX.
  std::size_t cardinality() const;
  friend bool operator==(const IntegerBox&, const IntegerBox&) = default;
};

struct BoundsMatrix {
  Grid lower;
  Grid upper;
};

BoundsMatrix zonotope_bounds(const Zonotope& z);

// C + sum_k alpha_k G_k. Throws InputError unless alpha has length m and
// every entry lies in [-1, 1].
Grid sample_zonotope(const Zonotope& z, std::span<const double> alpha);

enum class HullMethod {
  kBaseVertex,  // generators (X_i - X_0)/2 around X_0 + sum of them
  kInterval,    // axis-aligned box of the vertices, one generator per entry
};

// Zonotope enclosing the convex hull of the given equally-shaped grids.
// `height * width` must equal the grid row count.
Zonotope hull_to_zonotope(std::span<const Grid> vertices, std::size_t height,
                          std::size_t width,
                          HullMethod method = HullMethod::kBaseVertex);

}  // namespace kpcert
