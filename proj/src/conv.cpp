#include "mlfas/conv.hpp"

#include <string>

#include "mlfas/error.hpp"

namespace mlfas {

std::size_t ConvLayer::input_size() const {
  return static_cast<std::size_t>(in_channels) * static_cast<std::size_t>(in_h) * static_cast<std::size_t>(in_w);
}

std::size_t ConvLayer::output_size() const { return static_cast<std::size_t>(out_channels) * out_spatial(); }

void validate(const ConvLayer& layer) {
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ShapeError(std::string("conv layer: ") + what + " must be positive, got " + std::to_string(v));
  };
  positive(layer.out_channels, "out_channels");
  positive(layer.in_channels, "in_channels");
  positive(layer.kernel_h, "kernel height");
  positive(layer.kernel_w, "kernel width");
  positive(layer.stride_h, "stride (height axis)");
  positive(layer.stride_w, "stride (width axis)");
  positive(layer.in_h, "input height");
  positive(layer.in_w, "input width");
  if (layer.pad_h < 0 || layer.pad_w < 0) throw ShapeError("conv layer: padding must be nonnegative");
  if (layer.in_h + 2 * layer.pad_h < layer.kernel_h) {
    throw ShapeError("conv layer: kernel taller than padded input (height axis)");
  }
  if (layer.in_w + 2 * layer.pad_w < layer.kernel_w) {
    throw ShapeError("conv layer: kernel wider than padded input (width axis)");
  }
  const std::size_t want = static_cast<std::size_t>(layer.out_channels) * layer.in_channels * layer.taps();
  if (layer.kernels.size() != want) {
    throw ShapeError("conv layer: kernel buffer has " + std::to_string(layer.kernels.size()) + " entries, expected " +
                     std::to_string(want));
  }
  if (layer.bias.size() != layer.out_channels) throw ShapeError("conv layer: bias length differs from out_channels");
}

ConvLayer make_conv_layer(int out_channels, int in_channels, int kernel_h, int kernel_w, int in_h, int in_w,
                          int stride_h, int stride_w, int pad_h, int pad_w) {
  ConvLayer layer;
  layer.out_channels = out_channels;
  layer.in_channels = in_channels;
  layer.kernel_h = kernel_h;
  layer.kernel_w = kernel_w;
  layer.in_h = in_h;
  layer.in_w = in_w;
  layer.stride_h = stride_h;
  layer.stride_w = stride_w;
  layer.pad_h = pad_h;
  layer.pad_w = pad_w;
  if (out_channels > 0 && in_channels > 0 && kernel_h > 0 && kernel_w > 0) {
    layer.kernels.assign(static_cast<std::size_t>(out_channels) * in_channels * kernel_h * kernel_w, 0.0);
    layer.bias = Vector::Zero(out_channels);
  }
  validate(layer);
  return layer;
}

void conv_forward_sample(const ConvLayer& l, const double* input, double* output) {
  const int oh = l.out_h();
  const int ow = l.out_w();
  const std::size_t in_plane = static_cast<std::size_t>(l.in_h) * l.in_w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  for (int o = 0; o < l.out_channels; ++o) {
    double* out = output + o * out_plane;
    for (std::size_t p = 0; p < out_plane; ++p) out[p] = l.bias[o];
    for (int i = 0; i < l.in_channels; ++i) {
      const double* in = input + i * in_plane;
      for (int r = 0; r < l.kernel_h; ++r) {
        for (int c = 0; c < l.kernel_w; ++c) {
          const double w = l.kernel(o, i, r, c);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * l.stride_h - l.pad_h + r;
            if (iy < 0 || iy >= l.in_h) continue;
            const double* in_row = in + static_cast<std::size_t>(iy) * l.in_w;
            double* out_row = out + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * l.stride_w - l.pad_w + c;
              if (ix < 0 || ix >= l.in_w) continue;
              out_row[ox] += w * in_row[ix];
            }
          }
        }
      }
    }
  }
}

void conv_backward_sample(const ConvLayer& l, const double* input, const double* upstream, double* kernel_grad,
                          double* bias_grad, double* input_grad) {
  const int oh = l.out_h();
  const int ow = l.out_w();
  const std::size_t in_plane = static_cast<std::size_t>(l.in_h) * l.in_w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  for (int o = 0; o < l.out_channels; ++o) {
    const double* up = upstream + o * out_plane;
    double bsum = 0.0;
    for (std::size_t p = 0; p < out_plane; ++p) bsum += up[p];
    bias_grad[o] += bsum;
    for (int i = 0; i < l.in_channels; ++i) {
      const double* in = input + i * in_plane;
      double* in_grad = input_grad != nullptr ? input_grad + i * in_plane : nullptr;
      for (int r = 0; r < l.kernel_h; ++r) {
        for (int c = 0; c < l.kernel_w; ++c) {
          const double w = l.kernel(o, i, r, c);
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * l.stride_h - l.pad_h + r;
            if (iy < 0 || iy >= l.in_h) continue;
            const std::size_t in_row = static_cast<std::size_t>(iy) * l.in_w;
            const double* up_row = up + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * l.stride_w - l.pad_w + c;
              if (ix < 0 || ix >= l.in_w) continue;
              acc += up_row[ox] * in[in_row + ix];
              if (in_grad != nullptr) in_grad[in_row + ix] += up_row[ox] * w;
            }
          }
          kernel_grad[((static_cast<std::size_t>(o) * l.in_channels + i) * l.kernel_h + r) * l.kernel_w + c] += acc;
        }
      }
    }
  }
}

namespace {
void require_input(const ConvLayer& layer, const ChannelTensor& t, const char* what) {
  if (t.channels != layer.in_channels) {
    throw ShapeError(std::string(what) + ": channel axis is " + std::to_string(t.channels) + ", layer expects " +
                     std::to_string(layer.in_channels));
  }
  if (t.height != layer.in_h) {
    throw ShapeError(std::string(what) + ": height axis is " + std::to_string(t.height) + ", layer expects " +
                     std::to_string(layer.in_h));
  }
  if (t.width != layer.in_w) {
    throw ShapeError(std::string(what) + ": width axis is " + std::to_string(t.width) + ", layer expects " +
                     std::to_string(layer.in_w));
  }
  if (t.data.size() != layer.input_size()) throw ShapeError(std::string(what) + ": tensor buffer has wrong length");
}
}  // namespace

ChannelTensor conv_forward(const ConvLayer& layer, const ChannelTensor& input) {
  validate(layer);
  require_input(layer, input, "conv_forward");
  ChannelTensor out(layer.out_channels, layer.out_h(), layer.out_w());
  conv_forward_sample(layer, input.data.data(), out.data.data());
  return out;
}

ConvGradients conv_backward(const ConvLayer& layer, const ChannelTensor& input, const ChannelTensor& upstream) {
  validate(layer);
  require_input(layer, input, "conv_backward");
  if (upstream.channels != layer.out_channels || upstream.height != layer.out_h() || upstream.width != layer.out_w() ||
      upstream.data.size() != layer.output_size()) {
    throw ShapeError("conv_backward: upstream gradient does not match the layer output shape");
  }
  ConvGradients g;
  g.kernels.assign(layer.kernels.size(), 0.0);
  g.bias = Vector::Zero(layer.out_channels);
  g.input = ChannelTensor(layer.in_channels, layer.in_h, layer.in_w);
  conv_backward_sample(layer, input.data.data(), upstream.data.data(), g.kernels.data(), g.bias.data(),
                       g.input.data.data());
  return g;
}

Eigen::MatrixXd to_matrix(const ConvLayer& layer) {
  validate(layer);
  const std::size_t rows = layer.output_size();
  const std::size_t cols = layer.input_size();
  if (rows * cols > 1'000'000) {
    throw ShapeError("to_matrix: explicit matrix would have " + std::to_string(rows * cols) +
                     " entries (limit 1000000)");
  }
  const int oh = layer.out_h();
  const int ow = layer.out_w();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Eigen::Index row = (static_cast<Eigen::Index>(o) * oh + oy) * ow + ox;
        for (int i = 0; i < layer.in_channels; ++i) {
          for (int r = 0; r < layer.kernel_h; ++r) {
            const int iy = oy * layer.stride_h - layer.pad_h + r;
            if (iy < 0 || iy >= layer.in_h) continue;
            for (int c = 0; c < layer.kernel_w; ++c) {
              const int ix = ox * layer.stride_w - layer.pad_w + c;
              if (ix < 0 || ix >= layer.in_w) continue;
              const Eigen::Index col = (static_cast<Eigen::Index>(i) * layer.in_h + iy) * layer.in_w + ix;
              m(row, col) += layer.kernel(o, i, r, c);
            }
          }
        }
      }
    }
  }
  return m;
}

LayerTransfer flatten_interface(int channels, int spatial, const LayerTransfer& channel_transfer) {
  if (channels < 1 || spatial < 1) throw ShapeError("flatten_interface: channels and spatial size must be positive");
  if (channel_transfer.fine_size() != static_cast<std::size_t>(channels)) {
    throw ShapeError("flatten_interface: transfer covers " + std::to_string(channel_transfer.fine_size()) +
                     " channels, interface has " + std::to_string(channels));
  }
  const auto s = static_cast<std::size_t>(spatial);
  LayerTransfer t;
  t.coarse_size = channel_transfer.coarse_size * s;
  t.weighted = channel_transfer.weighted;
  t.zero_norm_fallbacks = channel_transfer.zero_norm_fallbacks;
  const std::size_t n = static_cast<std::size_t>(channels) * s;
  t.aggregate.resize(n);
  t.p_weight.resize(n);
  t.pi_weight.resize(n);
  if (t.weighted) t.row_norms.resize(n);
  for (std::size_t c = 0; c < static_cast<std::size_t>(channels); ++c) {
    for (std::size_t p = 0; p < s; ++p) {
      const std::size_t i = c * s + p;
      t.aggregate[i] = channel_transfer.aggregate[c] * s + p;
      t.p_weight[i] = channel_transfer.p_weight[c];
      t.pi_weight[i] = channel_transfer.pi_weight[c];
      if (t.weighted) t.row_norms[i] = channel_transfer.row_norms[c];
    }
  }
  return t;
}

}  // namespace mlfas
