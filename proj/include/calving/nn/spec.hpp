#pragma once

#include <string>
#include <variant>
#include <vector>

#include "calving/common.hpp"

namespace calving::nn {

struct Dense {
  int in = 0;
  int out = 0;
};

struct Conv1d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};

struct GlobalAvgPool {};
struct Relu {};
struct Softmax {};

using Layer = std::variant<Dense, Conv1d, GlobalAvgPool, Relu, Softmax>;

struct Shape {
  int channels = 0;
  int length = 1;
  int size() const { return channels * length; }
  bool operator==(const Shape&) const = default;
};

inline std::string shape_str(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.length);
}

// Ordered layer list plus the declared input shape. hlo_tap names the layer
// whose output is exposed as the hidden representation (-1 = none).
struct NetworkSpec {
  Shape input;
  std::vector<Layer> layers;
  int hlo_tap = -1;

  // Output shape of each layer in order; throws on any incompatibility.
  std::vector<Shape> layer_shapes() const {
    std::vector<Shape> out;
    out.reserve(layers.size());
    Shape cur = input;
    if (cur.channels <= 0 || cur.length <= 0)
      throw ContractViolation("network input shape must be positive, got " + shape_str(cur));
    for (size_t i = 0; i < layers.size(); ++i) {
      const Layer& ly = layers[i];
      if (const auto* d = std::get_if<Dense>(&ly)) {
        if (cur.length != 1 || cur.channels != d->in)
          throw ContractViolation("dense layer " + std::to_string(i) + " expects " +
                                  std::to_string(d->in) + "x1 input, got " + shape_str(cur));
        cur = {d->out, 1};
      } else if (const auto* c = std::get_if<Conv1d>(&ly)) {
        if (cur.channels != c->in_channels)
          throw ContractViolation("conv1d layer " + std::to_string(i) + " expects " +
                                  std::to_string(c->in_channels) + " channels, got " +
                                  shape_str(cur));
        if (c->kernel <= 0 || c->stride <= 0 || cur.length < c->kernel)
          throw ContractViolation("conv1d layer " + std::to_string(i) +
                                  " kernel/stride incompatible with input length " +
                                  std::to_string(cur.length));
        cur = {c->out_channels, (cur.length - c->kernel) / c->stride + 1};
      } else if (std::holds_alternative<GlobalAvgPool>(ly)) {
        cur = {cur.channels, 1};
      } else if (std::holds_alternative<Softmax>(ly)) {
        if (cur.length != 1)
          throw ContractViolation("softmax layer " + std::to_string(i) +
                                  " requires a flat input, got " + shape_str(cur));
        // shape unchanged
      }
      // Relu: shape unchanged
      out.push_back(cur);
    }
    if (hlo_tap != -1 &&
        (hlo_tap < 0 || hlo_tap >= static_cast<int>(layers.size())))
      throw ContractViolation("hlo_tap " + std::to_string(hlo_tap) + " out of range");
    return out;
  }

  Shape output_shape() const {
    auto shapes = layer_shapes();
    return shapes.empty() ? input : shapes.back();
  }

  Shape tap_shape() const {
    if (hlo_tap < 0) throw ContractViolation("network spec has no hlo_tap");
    return layer_shapes()[static_cast<size_t>(hlo_tap)];
  }
};

// Convenience builder: dense chain in -> h1 -> ... -> out with ReLU between
// layers and a trailing softmax. tap_width, when >= 0, places the hlo tap on
// the activation of the last hidden layer of that width.
inline NetworkSpec dense_classifier(int in, const std::vector<int>& hidden, int out,
                                    int tap_width = -1) {
  NetworkSpec spec;
  spec.input = {in, 1};
  int cur = in;
  for (int h : hidden) {
    spec.layers.push_back(Dense{cur, h});
    spec.layers.push_back(Relu{});
    if (h == tap_width) spec.hlo_tap = static_cast<int>(spec.layers.size()) - 1;
    cur = h;
  }
  spec.layers.push_back(Dense{cur, out});
  spec.layers.push_back(Softmax{});
  return spec;
}

}  // namespace calving::nn
