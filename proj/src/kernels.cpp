#include "mlfas/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mlfas::kernels {

BatchMatrix layer_forward(const Layer& layer, const BatchMatrix& in) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) {
    BatchMatrix z = d->weights * in;
    z.colwise() += d->bias;
    return z;
  }
  const auto& c = std::get<ConvLayer>(layer);
  BatchMatrix z(static_cast<Eigen::Index>(c.output_size()), in.cols());
  for (Eigen::Index s = 0; s < in.cols(); ++s) conv_forward_sample(c, in.col(s).data(), z.col(s).data());
  return z;
}

void layer_backward(const Layer& layer, const BatchMatrix& in, const BatchMatrix& delta, double* weight_grad,
                    double* bias_grad, BatchMatrix* input_grad) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) {
    Eigen::Map<RowMatrix> wg(weight_grad, d->weights.rows(), d->weights.cols());
    Eigen::Map<Vector> bg(bias_grad, d->bias.size());
    wg.noalias() += delta * in.transpose();
    bg += delta.rowwise().sum();
    if (input_grad != nullptr) *input_grad = d->weights.transpose() * delta;
    return;
  }
  const auto& c = std::get<ConvLayer>(layer);
  if (input_grad != nullptr) input_grad->setZero(static_cast<Eigen::Index>(c.input_size()), in.cols());
  for (Eigen::Index s = 0; s < in.cols(); ++s) {
    conv_backward_sample(c, in.col(s).data(), delta.col(s).data(), weight_grad, bias_grad,
                         input_grad != nullptr ? input_grad->col(s).data() : nullptr);
  }
}

void activate(const Activation& act, BatchMatrix& z) {
  switch (act.kind) {
    case ActivationKind::relu: z = z.cwiseMax(0.0); break;
    case ActivationKind::leaky_relu: z = z.unaryExpr([&](double v) { return act.apply(v); }); break;
    case ActivationKind::identity: break;
  }
}

void apply_derivative(const Activation& act, const BatchMatrix& z, BatchMatrix& delta) {
  if (act.kind == ActivationKind::identity) return;
  delta = delta.cwiseProduct(z.unaryExpr([&](double v) { return act.derivative(v); }));
}

namespace {

std::size_t chunk_count(Eigen::Index samples) {
  return (static_cast<std::size_t>(samples) + chunk_size - 1) / chunk_size;
}

}  // namespace

BatchMatrix forward_batch(const Network& net, const BatchMatrix& inputs) {
  const Eigen::Index n = inputs.cols();
  BatchMatrix out(static_cast<Eigen::Index>(net.output_size()), n);
  const auto chunks = static_cast<std::ptrdiff_t>(chunk_count(n));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const Eigen::Index begin = c * static_cast<Eigen::Index>(chunk_size);
    const Eigen::Index width = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk_size), n - begin);
    BatchMatrix y = inputs.middleCols(begin, width);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      y = layer_forward(net.layers[k], y);
      if (k + 1 < net.layers.size() || net.activate_output) activate(net.activation, y);
    }
    out.middleCols(begin, width) = y;
  }
  return out;
}

ChunkGradient chunk_gradient(const Network& net, const ParamLayout& layout, const BatchMatrix& inputs,
                             const BatchMatrix& targets, double scale) {
  const std::size_t depth = net.layers.size();
  std::vector<BatchMatrix> acts(depth + 1);
  std::vector<BatchMatrix> pre(depth);
  acts[0] = inputs;
  for (std::size_t k = 0; k < depth; ++k) {
    pre[k] = layer_forward(net.layers[k], acts[k]);
    acts[k + 1] = pre[k];
    if (k + 1 < depth || net.activate_output) activate(net.activation, acts[k + 1]);
  }

  ChunkGradient result;
  result.gradient = Vector::Zero(static_cast<Eigen::Index>(layout.total_len()));
  BatchMatrix err = acts[depth] - targets;
  result.squared_error = err.squaredNorm();
  result.max_error = err.size() > 0 ? err.cwiseAbs().maxCoeff() : 0.0;

  BatchMatrix delta = (2.0 * scale) * err;
  if (net.activate_output) apply_derivative(net.activation, pre[depth - 1], delta);
  for (std::size_t k = depth; k-- > 0;) {
    double* wg = result.gradient.data() + layout.weight(k).offset;
    double* bg = result.gradient.data() + layout.bias(k).offset;
    if (k > 0) {
      BatchMatrix prev;
      layer_backward(net.layers[k], acts[k], delta, wg, bg, &prev);
      apply_derivative(net.activation, pre[k - 1], prev);
      delta = std::move(prev);
    } else {
      layer_backward(net.layers[k], acts[k], delta, wg, bg, nullptr);
    }
  }
  return result;
}

}  // namespace mlfas::kernels
