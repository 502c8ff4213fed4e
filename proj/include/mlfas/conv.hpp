#pragma once

// Multi-channel 2D convolution layers (cross-correlation, zero padding) and
// their explicit block-Toeplitz matrix form.

#include <cstddef>
#include <vector>

#include "mlfas/coarsening.hpp"
#include "mlfas/types.hpp"

namespace mlfas {

struct ConvLayer {
  int out_channels = 1;
  int in_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;
  int in_h = 1;
  int in_w = 1;
  /// Layout [out][in][kernel row][kernel col].
  std::vector<double> kernels;
  Vector bias;

  int out_h() const { return (in_h + 2 * pad_h - kernel_h) / stride_h + 1; }
  int out_w() const { return (in_w + 2 * pad_w - kernel_w) / stride_w + 1; }
  std::size_t taps() const { return static_cast<std::size_t>(kernel_h) * static_cast<std::size_t>(kernel_w); }
  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t out_spatial() const { return static_cast<std::size_t>(out_h()) * static_cast<std::size_t>(out_w()); }

  double& kernel(int o, int i, int r, int c) {
    return kernels[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + r) * kernel_w + c];
  }
  double kernel(int o, int i, int r, int c) const {
    return kernels[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + r) * kernel_w + c];
  }
};

/// Zero-initialised layer with validated geometry. Throws ShapeError naming
/// the offending axis.
ConvLayer make_conv_layer(int out_channels, int in_channels, int kernel_h, int kernel_w, int in_h,
                          int in_w, int stride_h = 1, int stride_w = 1, int pad_h = 0, int pad_w = 0);

void validate(const ConvLayer& layer);

/// Channel-major activation tensor.
struct ChannelTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  ChannelTensor() = default;
  ChannelTensor(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

/// W y + b for one sample. Activation is applied by the network.
ChannelTensor conv_forward(const ConvLayer& layer, const ChannelTensor& input);

struct ConvGradients {
  std::vector<double> kernels;
  Vector bias;
  ChannelTensor input;
};

ConvGradients conv_backward(const ConvLayer& layer, const ChannelTensor& input, const ChannelTensor& upstream);

/// Raw single-sample kernels shared by the tensor API and the batched paths.
/// `kernel_grad`/`bias_grad` accumulate; `input_grad` accumulates when non-null.
void conv_forward_sample(const ConvLayer& layer, const double* input, double* output);
void conv_backward_sample(const ConvLayer& layer, const double* input, const double* upstream,
                          double* kernel_grad, double* bias_grad, double* input_grad);

/// Explicit matrix with block rows per output channel and block columns per
/// input channel; `to_matrix(layer) * vec(y) + bias` equals conv_forward.
/// Refuses matrices above one million entries.
Eigen::MatrixXd to_matrix(const ConvLayer& layer);

/// Expands a channel transfer over `spatial` positions per channel for a
/// channel-major flattened interface (Kronecker product with the identity).
LayerTransfer flatten_interface(int channels, int spatial, const LayerTransfer& channel_transfer);

}  // namespace mlfas
