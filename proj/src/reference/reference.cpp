#include "mlfas/reference.hpp"

#include <algorithm>
#include <cmath>

namespace mlfas::reference {

namespace {

struct ConvIndex {
  const ConvLayer& c;
  std::size_t out_h, out_w;

  explicit ConvIndex(const ConvLayer& layer)
      : c(layer), out_h(static_cast<std::size_t>(layer.out_h())), out_w(static_cast<std::size_t>(layer.out_w())) {}

  std::size_t kernel(int o, int i, int r, int col) const {
    return ((static_cast<std::size_t>(o) * c.in_channels + i) * c.kernel_h + r) * c.kernel_w + col;
  }
  // Input position read by output (y, x) at tap (r, col); -1 when in the padding.
  long input(int i, std::size_t y, std::size_t x, int r, int col) const {
    const long yy = static_cast<long>(y) * c.stride_h + r - c.pad_h;
    const long xx = static_cast<long>(x) * c.stride_w + col - c.pad_w;
    if (yy < 0 || yy >= c.in_h || xx < 0 || xx >= c.in_w) return -1;
    return (static_cast<long>(i) * c.in_h + yy) * c.in_w + xx;
  }
  std::size_t output(int o, std::size_t y, std::size_t x) const { return (o * out_h + y) * out_w + x; }
};

std::vector<double> layer_pre_activation(const Layer& layer, const std::vector<double>& in) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) {
    std::vector<double> z(static_cast<std::size_t>(d->weights.rows()));
    for (Eigen::Index i = 0; i < d->weights.rows(); ++i) {
      double s = d->bias[i];
      for (Eigen::Index j = 0; j < d->weights.cols(); ++j) s += d->weights(i, j) * in[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = s;
    }
    return z;
  }
  return conv_forward(std::get<ConvLayer>(layer), in);
}

struct Trace {
  std::vector<std::vector<double>> inputs;  // input of each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
  std::vector<double> output;
};

Trace trace(const Network& net, const std::vector<double>& input) {
  Trace t;
  std::vector<double> a = input;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    t.inputs.push_back(a);
    std::vector<double> z = layer_pre_activation(net.layers[k], a);
    t.pre.push_back(z);
    const bool last = k + 1 == net.layers.size();
    if (!last || net.activate_output) {
      for (double& v : z) v = net.activation.apply(v);
    }
    a = std::move(z);
  }
  t.output = std::move(a);
  return t;
}

std::vector<double> column(const BatchMatrix& m, Eigen::Index j) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, j);
  return v;
}

}  // namespace

std::vector<double> conv_forward(const ConvLayer& layer, const std::vector<double>& input) {
  const ConvIndex ix(layer);
  std::vector<double> out(static_cast<std::size_t>(layer.out_channels) * ix.out_h * ix.out_w);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (std::size_t y = 0; y < ix.out_h; ++y) {
      for (std::size_t x = 0; x < ix.out_w; ++x) {
        double s = layer.bias[o];
        for (int i = 0; i < layer.in_channels; ++i) {
          for (int r = 0; r < layer.kernel_h; ++r) {
            for (int col = 0; col < layer.kernel_w; ++col) {
              const long p = ix.input(i, y, x, r, col);
              if (p >= 0) s += layer.kernels[ix.kernel(o, i, r, col)] * input[static_cast<std::size_t>(p)];
            }
          }
        }
        out[ix.output(o, y, x)] = s;
      }
    }
  }
  return out;
}

Vector forward(const Network& net, const Vector& input) {
  std::vector<double> in(input.data(), input.data() + input.size());
  const auto out = trace(net, in).output;
  return Eigen::Map<const Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

BatchMatrix forward_batch(const Network& net, const BatchMatrix& inputs) {
  BatchMatrix out(static_cast<Eigen::Index>(net.output_size()), inputs.cols());
  for (Eigen::Index s = 0; s < inputs.cols(); ++s) out.col(s) = reference::forward(net, Vector(inputs.col(s)));
  return out;
}

LossValue loss(const Network& net, const Minibatch& batch) {
  LossValue v;
  for (Eigen::Index s = 0; s < batch.inputs.cols(); ++s) {
    const auto out = trace(net, column(batch.inputs, s)).output;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double e = out[i] - batch.targets(static_cast<Eigen::Index>(i), s);
      v.l2 += e * e;
      v.linf = std::max(v.linf, std::abs(e));
    }
  }
  v.l2 /= static_cast<double>(batch.inputs.cols());
  return v;
}

ParamVector gradient(const Network& net, const Minibatch& batch) {
  ParamVector g(param_layout(net));
  const double scale = 2.0 / static_cast<double>(batch.inputs.cols());
  const std::size_t layers = net.layers.size();
  for (Eigen::Index s = 0; s < batch.inputs.cols(); ++s) {
    const Trace t = trace(net, column(batch.inputs, s));
    std::vector<double> delta(t.output.size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta[i] = scale * (t.output[i] - batch.targets(static_cast<Eigen::Index>(i), s));
      if (net.activate_output) delta[i] *= net.activation.derivative(t.pre[layers - 1][i]);
    }
    for (std::size_t k = layers; k-- > 0;) {
      auto gw = g.weights(k);
      auto gb = g.bias(k);
      const std::vector<double>& in = t.inputs[k];
      std::vector<double> prev(in.size(), 0.0);
      if (const auto* d = std::get_if<DenseLayer>(&net.layers[k])) {
        const Eigen::Index cols = d->weights.cols();
        for (Eigen::Index i = 0; i < d->weights.rows(); ++i) {
          const double di = delta[static_cast<std::size_t>(i)];
          gb[i] += di;
          for (Eigen::Index j = 0; j < cols; ++j) {
            gw[i * cols + j] += di * in[static_cast<std::size_t>(j)];
            prev[static_cast<std::size_t>(j)] += d->weights(i, j) * di;
          }
        }
      } else {
        const auto& c = std::get<ConvLayer>(net.layers[k]);
        const ConvIndex ix(c);
        for (int o = 0; o < c.out_channels; ++o) {
          for (std::size_t y = 0; y < ix.out_h; ++y) {
            for (std::size_t x = 0; x < ix.out_w; ++x) {
              const double d = delta[ix.output(o, y, x)];
              gb[o] += d;
              for (int i = 0; i < c.in_channels; ++i) {
                for (int r = 0; r < c.kernel_h; ++r) {
                  for (int col = 0; col < c.kernel_w; ++col) {
                    const long p = ix.input(i, y, x, r, col);
                    if (p < 0) continue;
                    const std::size_t kk = ix.kernel(o, i, r, col);
                    gw[static_cast<Eigen::Index>(kk)] += d * in[static_cast<std::size_t>(p)];
                    prev[static_cast<std::size_t>(p)] += c.kernels[kk] * d;
                  }
                }
              }
            }
          }
        }
      }
      if (k > 0) {
        for (std::size_t j = 0; j < prev.size(); ++j) prev[j] *= net.activation.derivative(t.pre[k - 1][j]);
      }
      delta = std::move(prev);
    }
  }
  return g;
}

}  // namespace mlfas::reference
