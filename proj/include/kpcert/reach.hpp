#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "kpcert/geometry.hpp"
#include "kpcert/instance.hpp"

namespace kpcert {

// Activations are flat vectors in height-width-channel order:
// index = ((y * w) + x) * c + channel, matching a Grid with rows = h*w and
// cols = c.
struct Shape {
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t c = 1;
  std::size_t size() const { return h * w * c; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct DenseLayer {
  std::vector<std::vector<double>> weights;  // [out][in]
  std::vector<double> bias;                  // [out]
};

struct Conv2DLayer {
  // kernel[out][in][ky][kx]
  std::vector<std::vector<std::vector<std::vector<double>>>> kernel;
  std::vector<double> bias;  // [out]
  std::size_t stride = 1;
  std::size_t pad = 0;
};

struct ReluLayer {};
struct FlattenLayer {};
struct ReshapeLayer {
  Shape shape;
};

using Layer = std::variant<DenseLayer, Conv2DLayer, ReluLayer, FlattenLayer, ReshapeLayer>;

class Network {
 public:
  Network() = default;
  // Throws InputError on non-finite or ragged parameters.
  explicit Network(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  // Shape after each layer, starting from `input`. Throws InputError when a
  // layer does not accept the incoming shape.
  std::vector<Shape> shapes(Shape input) const;
  Shape output_shape(Shape input) const { return shapes(input).back(); }

  std::vector<double> forward(std::span<const double> x, Shape input) const;

 private:
  std::vector<Layer> layers_;
};

// Zonotope over a flat activation vector.
struct VectorZonotope {
  std::vector<double> center;
  std::vector<std::vector<double>> generators;

  std::vector<double> lower() const;
  std::vector<double> upper() const;
};

enum class ReluMode {
  kDeepZ,     // slope u/(u-l) plus one fresh generator per crossing neuron
  kInterval,  // crossing neurons replaced by the box [0, u]
};

VectorZonotope propagate(const Network& net, VectorZonotope input, Shape input_shape,
                         ReluMode mode = ReluMode::kDeepZ);

// Image-space zonotope (rows = h*w pixels, cols = colour channels) to a
// heatmap-space zonotope. Throws InputError unless the network ends in an
// H x W x K activation.
Zonotope propagate(const Network& net, const Zonotope& input,
                   ReluMode mode = ReluMode::kDeepZ);

// Concrete heatmaps of one image (rows = h*w, cols = channels).
Grid forward_image(const Network& net, const Grid& image, std::size_t height,
                   std::size_t width);

struct ImageSetSpec {
  std::size_t height = 0;  // input image height
  std::size_t width = 0;   // input image width
  std::vector<int> ground_truth;
  HPolytope deviation_polytope;
  double epsilon = 1e-6;
  HullMethod hull = HullMethod::kBaseVertex;
  ReluMode relu = ReluMode::kDeepZ;
};

// Hull of the seed and perturbed images, pushed through the network. The
// seed's concrete heatmaps become the instance's seed heatmap.
ProblemInstance instance_from_images(const Network& net, const Grid& seed,
                                     std::span<const Grid> perturbed,
                                     const ImageSetSpec& spec);

}  // namespace kpcert
