#include "kpcert/reach.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "kpcert/error.hpp"

namespace kpcert {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::string shape_text(Shape s) {
  return std::to_string(s.h) + "x" + std::to_string(s.w) + "x" + std::to_string(s.c);
}

void require_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw InputError("non-finite parameter in " + where);
}

struct SparseRow {
  std::vector<std::pair<std::size_t, double>> terms;
  double bias = 0.0;
};

Shape conv_output(const Conv2DLayer& conv, Shape in, std::size_t layer) {
  const std::size_t in_ch = conv.kernel.front().size();
  const std::size_t kh = conv.kernel.front().front().size();
  const std::size_t kw = conv.kernel.front().front().front().size();
  if (in.c != in_ch) {
    throw InputError("layer " + std::to_string(layer) + ": conv2d expects " +
                     std::to_string(in_ch) + " input channels, got " + shape_text(in));
  }
  if (in.h + 2 * conv.pad < kh || in.w + 2 * conv.pad < kw) {
    throw InputError("layer " + std::to_string(layer) + ": conv2d kernel larger than " +
                     shape_text(in) + " input");
  }
  return {(in.h + 2 * conv.pad - kh) / conv.stride + 1,
          (in.w + 2 * conv.pad - kw) / conv.stride + 1, conv.kernel.size()};
}

std::vector<SparseRow> dense_rows(const DenseLayer& d) {
  std::vector<SparseRow> rows(d.weights.size());
  for (std::size_t o = 0; o < rows.size(); ++o) {
    for (std::size_t i = 0; i < d.weights[o].size(); ++i) {
      if (d.weights[o][i] != 0.0) rows[o].terms.push_back({i, d.weights[o][i]});
    }
    rows[o].bias = d.bias[o];
  }
  return rows;
}

std::vector<SparseRow> conv_rows(const Conv2DLayer& conv, Shape in, Shape out) {
  const std::size_t kh = conv.kernel.front().front().size();
  const std::size_t kw = conv.kernel.front().front().front().size();
  std::vector<SparseRow> rows(out.size());
  for (std::size_t oy = 0; oy < out.h; ++oy) {
    for (std::size_t ox = 0; ox < out.w; ++ox) {
      for (std::size_t oc = 0; oc < out.c; ++oc) {
        SparseRow& row = rows[(oy * out.w + ox) * out.c + oc];
        row.bias = conv.bias[oc];
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            // Position in the unpadded input; skip the zero border.
            const long y = long(oy * conv.stride + ky) - long(conv.pad);
            const long x = long(ox * conv.stride + kx) - long(conv.pad);
            if (y < 0 || x < 0 || y >= long(in.h) || x >= long(in.w)) continue;
            for (std::size_t ic = 0; ic < in.c; ++ic) {
              double wgt = conv.kernel[oc][ic][ky][kx];
              if (wgt == 0.0) continue;
              row.terms.push_back({(std::size_t(y) * in.w + std::size_t(x)) * in.c + ic, wgt});
            }
          }
        }
      }
    }
  }
  return rows;
}

std::vector<double> apply(const std::vector<SparseRow>& rows, std::span<const double> x,
                          bool with_bias) {
  std::vector<double> y(rows.size());
  for (std::size_t o = 0; o < rows.size(); ++o) {
    double s = with_bias ? rows[o].bias : 0.0;
    for (auto [i, w] : rows[o].terms) s += w * x[i];
    y[o] = s;
  }
  return y;
}

// Affine rows of layer `l` given its input shape; empty for non-affine layers.
std::vector<SparseRow> affine_rows(const Layer& layer, Shape in, Shape out) {
  if (auto* d = std::get_if<DenseLayer>(&layer)) return dense_rows(*d);
  if (auto* c = std::get_if<Conv2DLayer>(&layer)) return conv_rows(*c, in, out);
  return {};
}

bool is_affine(const Layer& layer) {
  return std::holds_alternative<DenseLayer>(layer) ||
         std::holds_alternative<Conv2DLayer>(layer);
}

}  // namespace

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string where = "layer " + std::to_string(l);
    std::visit(
        Overloaded{
            [&](const DenseLayer& d) {
              if (d.weights.empty() || d.weights.size() != d.bias.size()) {
                throw InputError(where + ": dense weights/bias size mismatch");
              }
              for (const auto& row : d.weights) {
                if (row.size() != d.weights.front().size() || row.empty()) {
                  throw InputError(where + ": ragged dense weights");
                }
                for (double v : row) require_finite(v, where);
              }
              for (double v : d.bias) require_finite(v, where);
            },
            [&](const Conv2DLayer& c) {
              if (c.kernel.empty() || c.kernel.size() != c.bias.size()) {
                throw InputError(where + ": conv2d kernel/bias size mismatch");
              }
              if (c.stride == 0) throw InputError(where + ": conv2d stride must be >= 1");
              const auto& k0 = c.kernel.front();
              if (k0.empty() || k0.front().empty() || k0.front().front().empty()) {
                throw InputError(where + ": empty conv2d kernel");
              }
              for (const auto& out : c.kernel) {
                if (out.size() != k0.size()) throw InputError(where + ": ragged kernel");
                for (const auto& in : out) {
                  if (in.size() != k0.front().size()) {
                    throw InputError(where + ": ragged kernel");
                  }
                  for (const auto& row : in) {
                    if (row.size() != k0.front().front().size()) {
                      throw InputError(where + ": ragged kernel");
                    }
                    for (double v : row) require_finite(v, where);
                  }
                }
              }
              for (double v : c.bias) require_finite(v, where);
            },
            [&](const ReshapeLayer& r) {
              if (r.shape.size() == 0) throw InputError(where + ": empty reshape");
            },
            [](const auto&) {},
        },
        layers_[l]);
  }
}

std::vector<Shape> Network::shapes(Shape input) const {
  std::vector<Shape> out{input};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Shape in = out.back();
    const std::string where = "layer " + std::to_string(l);
    Shape next = std::visit(
        Overloaded{
            [&](const DenseLayer& d) {
              if (d.weights.front().size() != in.size()) {
                throw InputError(where + ": dense expects " +
                                 std::to_string(d.weights.front().size()) +
                                 " inputs, got " + shape_text(in));
              }
              return Shape{1, 1, d.weights.size()};
            },
            [&](const Conv2DLayer& c) { return conv_output(c, in, l); },
            [&](const ReluLayer&) { return in; },
            [&](const FlattenLayer&) { return Shape{1, 1, in.size()}; },
            [&](const ReshapeLayer& r) {
              if (r.shape.size() != in.size()) {
                throw InputError(where + ": cannot reshape " + shape_text(in) + " to " +
                                 shape_text(r.shape));
              }
              return r.shape;
            },
        },
        layers_[l]);
    out.push_back(next);
  }
  return out;
}

std::vector<double> Network::forward(std::span<const double> x, Shape input) const {
  if (x.size() != input.size()) throw InputError("input size does not match its shape");
  const auto shp = shapes(input);
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (is_affine(layers_[l])) {
      cur = apply(affine_rows(layers_[l], shp[l], shp[l + 1]), cur, true);
    } else if (std::holds_alternative<ReluLayer>(layers_[l])) {
      for (double& v : cur) v = std::max(v, 0.0);
    }
  }
  return cur;
}

std::vector<double> VectorZonotope::lower() const {
  std::vector<double> lo = center;
  for (const auto& g : generators) {
    for (std::size_t e = 0; e < lo.size(); ++e) lo[e] -= std::abs(g[e]);
  }
  return lo;
}

std::vector<double> VectorZonotope::upper() const {
  std::vector<double> hi = center;
  for (const auto& g : generators) {
    for (std::size_t e = 0; e < hi.size(); ++e) hi[e] += std::abs(g[e]);
  }
  return hi;
}

VectorZonotope propagate(const Network& net, VectorZonotope z, Shape input_shape,
                         ReluMode mode) {
  if (z.center.size() != input_shape.size()) {
    throw InputError("input zonotope size does not match " + shape_text(input_shape));
  }
  const auto shp = net.shapes(input_shape);
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (is_affine(layers[l])) {
      auto rows = affine_rows(layers[l], shp[l], shp[l + 1]);
      z.center = apply(rows, z.center, true);
      for (auto& g : z.generators) g = apply(rows, g, false);
      continue;
    }
    if (!std::holds_alternative<ReluLayer>(layers[l])) continue;

    const auto lo = z.lower();
    const auto hi = z.upper();
    const std::size_t n = z.center.size();
    std::vector<std::vector<double>> fresh;
    for (std::size_t e = 0; e < n; ++e) {
      if (lo[e] >= 0.0) continue;
      if (hi[e] <= 0.0) {
        z.center[e] = 0.0;
        for (auto& g : z.generators) g[e] = 0.0;
        continue;
      }
      std::vector<double> extra(n, 0.0);
      if (mode == ReluMode::kDeepZ) {
        const double lambda = hi[e] / (hi[e] - lo[e]);
        const double mu = -lambda * lo[e] / 2.0;
        z.center[e] = lambda * z.center[e] + mu;
        for (auto& g : z.generators) g[e] *= lambda;
        extra[e] = mu;
      } else {
        z.center[e] = hi[e] / 2.0;
        for (auto& g : z.generators) g[e] = 0.0;
        extra[e] = hi[e] / 2.0;
      }
      fresh.push_back(std::move(extra));
    }
    for (auto& g : fresh) z.generators.push_back(std::move(g));
  }
  return z;
}

Zonotope propagate(const Network& net, const Zonotope& input, ReluMode mode) {
  const Shape in{input.height(), input.width(), input.channels()};
  const Shape out = net.output_shape(in);
  VectorZonotope vz;
  auto cv = input.center().values();
  vz.center.assign(cv.begin(), cv.end());
  for (const auto& g : input.generators()) {
    auto gv = g.values();
    vz.generators.emplace_back(gv.begin(), gv.end());
  }
  vz = propagate(net, std::move(vz), in, mode);

  const std::size_t hw = out.h * out.w;
  Grid center(hw, out.c, std::move(vz.center));
  std::vector<Grid> gens;
  for (auto& g : vz.generators) gens.emplace_back(hw, out.c, std::move(g));
  return Zonotope(out.h, out.w, std::move(center), std::move(gens));
}

Grid forward_image(const Network& net, const Grid& image, std::size_t height,
                   std::size_t width) {
  if (image.rows() != height * width) {
    throw InputError("image has " + std::to_string(image.rows()) + " pixels, expected " +
                     std::to_string(height * width));
  }
  const Shape in{height, width, image.cols()};
  const Shape out = net.output_shape(in);
  return Grid(out.h * out.w, out.c, net.forward(image.values(), in));
}

ProblemInstance instance_from_images(const Network& net, const Grid& seed,
                                     std::span<const Grid> perturbed,
                                     const ImageSetSpec& spec) {
  std::vector<Grid> verts{seed};
  for (const auto& p : perturbed) {
    if (!p.same_shape(seed)) throw InputError("perturbed image shape differs from seed");
    verts.push_back(p);
  }
  Zonotope input = hull_to_zonotope(verts, spec.height, spec.width, spec.hull);
  Zonotope heat = propagate(net, input, spec.relu);

  ProblemInstance inst;
  inst.height = heat.height();
  inst.width = heat.width();
  inst.keypoints = heat.channels();
  inst.ground_truth = spec.ground_truth;
  inst.reach_set = std::move(heat);
  inst.deviation_polytope = spec.deviation_polytope;
  inst.epsilon = spec.epsilon;
  inst.seed_heatmap = forward_image(net, seed, spec.height, spec.width);
  inst.validate();
  return inst;
}

}  // namespace kpcert
