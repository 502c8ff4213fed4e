#pragma once

// Feedforward networks of dense and convolutional layers: forward pass,
// mean-squared loss and hand-written backpropagation.

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mlfas/conv.hpp"
#include "mlfas/params.hpp"
#include "mlfas/types.hpp"

namespace mlfas {

enum class ActivationKind { relu, leaky_relu, identity };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double slope = 0.01;  // leaky_relu only

  double apply(double z) const {
    switch (kind) {
      case ActivationKind::relu: return z > 0.0 ? z : 0.0;
      case ActivationKind::leaky_relu: return z > 0.0 ? z : slope * z;
      case ActivationKind::identity: return z;
    }
    return z;
  }
  /// Subgradient at 0 is 0 for relu (slope for leaky_relu).
  double derivative(double z) const {
    switch (kind) {
      case ActivationKind::relu: return z > 0.0 ? 1.0 : 0.0;
      case ActivationKind::leaky_relu: return z > 0.0 ? 1.0 : slope;
      case ActivationKind::identity: return 1.0;
    }
    return 1.0;
  }
};

std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(const std::string& name);

struct DenseLayer {
  RowMatrix weights;  // n_out x n_in
  Vector bias;        // n_out
};

using Layer = std::variant<DenseLayer, ConvLayer>;

struct Network {
  std::vector<Layer> layers;
  Activation activation;
  /// Apply the activation on the final layer as well. Off by default so that
  /// regression outputs may be negative.
  bool activate_output = false;

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t parameter_count() const;
};

/// Units feeding the layer's rows (neurons or output channels).
std::size_t layer_units(const Layer& layer);
std::size_t layer_input_size(const Layer& layer);
std::size_t layer_output_size(const Layer& layer);
std::size_t weight_count(const Layer& layer);
bool is_conv(const Layer& layer);

/// Checks dimension chaining and finiteness. Throws ShapeError naming the layer.
void validate(const Network& net);

std::shared_ptr<const ParamLayout> param_layout(const Network& net);

/// Unrolls [W_0[:], ..., W_L[:], b_0, ..., b_L] (row-major weights, conv
/// kernels in [out][in][row][col] order).
ParamVector flatten(const Network& net);
void unflatten(Network& net, const ParamVector& x);

// --- Construction -----------------------------------------------------------

struct LayerSpec {
  enum class Kind { dense, conv } kind = Kind::dense;
  int units = 0;  // neurons or output channels
  int kernel = 3;
  int stride = 1;
  int padding = 0;

  static LayerSpec dense(int width) { return {Kind::dense, width, 0, 1, 0}; }
  static LayerSpec conv(int channels, int kernel, int stride = 1, int padding = 0) {
    return {Kind::conv, channels, kernel, stride, padding};
  }
};

struct InputShape {
  int channels = 1;
  int height = 1;
  int width = 1;
  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
};

struct NetworkSpec {
  InputShape input;
  std::vector<LayerSpec> hidden;
  std::size_t output_size = 1;
  Activation activation;
  bool activate_output = false;
};

/// Builds the layers and draws every weight and bias uniformly from
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Network make_network(const NetworkSpec& spec, std::uint64_t seed);

/// Parses "dense:128,conv:16/3/2/0,..." (conv fields channels/kernel/stride/padding).
std::vector<LayerSpec> parse_hidden_spec(const std::string& text);
std::string format_hidden_spec(const std::vector<LayerSpec>& hidden);

// --- Evaluation ----------------------------------------------------------------

struct Minibatch {
  BatchMatrix inputs;   // input_size x batch
  BatchMatrix targets;  // output_size x batch

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

struct LossValue {
  double l2 = 0.0;    // mean over samples of the squared Euclidean error
  double linf = 0.0;  // max over samples and components of |error|
};

Vector forward(const Network& net, const Vector& input);
BatchMatrix forward_batch(const Network& net, const BatchMatrix& inputs);
LossValue loss(const Network& net, const Minibatch& batch);

struct GradientResult {
  ParamVector gradient;
  LossValue loss;
};

/// Gradient of the minibatch mean-squared loss, with the loss evaluated on the
/// same pass. Samples are processed in fixed-size chunks in parallel and the
/// chunk partials summed in chunk order, so the result does not depend on the
/// thread count.
GradientResult gradient_and_loss(const Network& net, const Minibatch& batch);
ParamVector backward(const Network& net, const Minibatch& batch);

}  // namespace mlfas
