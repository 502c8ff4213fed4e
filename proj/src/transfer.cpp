#include "mlfas/transfer.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mlfas/error.hpp"

namespace mlfas {

std::vector<LayerBlock> layer_blocks(const Network& net) {
  std::vector<LayerBlock> blocks;
  blocks.reserve(net.layers.size());
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const Layer& layer = net.layers[k];
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      LayerBlock b{static_cast<std::size_t>(d->weights.rows()), static_cast<std::size_t>(d->weights.cols()), 1};
      if (k > 0 && is_conv(net.layers[k - 1])) {
        const auto& prev = std::get<ConvLayer>(net.layers[k - 1]);
        b.cols = static_cast<std::size_t>(prev.out_channels);
        b.taps = prev.out_spatial();
      }
      blocks.push_back(b);
    } else {
      const auto& c = std::get<ConvLayer>(layer);
      blocks.push_back({static_cast<std::size_t>(c.out_channels), static_cast<std::size_t>(c.in_channels), c.taps()});
    }
  }
  return blocks;
}

namespace {

std::shared_ptr<const ParamLayout> layout_of(const std::vector<LayerBlock>& blocks) {
  std::vector<std::size_t> w, b;
  for (const auto& blk : blocks) {
    w.push_back(blk.rows * blk.cols * blk.taps);
    b.push_back(blk.rows);
  }
  return std::make_shared<const ParamLayout>(w, b);
}

void require_layout(const ParamVector& x, const ParamLayout& layout, const char* op, const char* which) {
  if (!(x.layout() == layout)) {
    throw ShapeError(std::string(op) + ": vector does not have the " + which + " parameter layout");
  }
}

// Scatter: out[agg_r(r), agg_c(c), t] += row_w[r] * col_w[c] * in[r, c, t].
void scatter_block(const LayerTransfer& row_t, const std::vector<double>& row_w, const LayerTransfer& col_t,
                   const std::vector<double>& col_w, const LayerBlock& fine, const LayerBlock& coarse,
                   const double* in, double* out) {
  for (std::size_t r = 0; r < fine.rows; ++r) {
    const std::size_t rc = row_t.aggregate[r];
    const double wr = row_w[r];
    for (std::size_t c = 0; c < fine.cols; ++c) {
      const double w = wr * col_w[c];
      const double* src = in + (r * fine.cols + c) * fine.taps;
      double* dst = out + (rc * coarse.cols + col_t.aggregate[c]) * coarse.taps;
      for (std::size_t t = 0; t < fine.taps; ++t) dst[t] += w * src[t];
    }
  }
}

enum class ScatterKind { iterate, gradient };

ParamVector scatter(const TransferLevel& t, const ParamVector& x, ScatterKind kind, const char* op) {
  require_layout(x, *t.fine_layout, op, "fine");
  ParamVector out(t.coarse_layout);
  for (std::size_t k = 0; k < t.layer_count(); ++k) {
    const LayerTransfer& row_t = t.interfaces[k + 1];
    const LayerTransfer& col_t = t.interfaces[k];
    const auto& row_w = kind == ScatterKind::iterate ? row_t.pi_weight : row_t.p_weight;
    const auto& col_w = kind == ScatterKind::iterate ? col_t.p_weight : col_t.pi_weight;
    scatter_block(row_t, row_w, col_t, col_w, t.fine_blocks[k], t.coarse_blocks[k], x.weights(k).data(),
                  out.weights(k).data());
    auto b = x.bias(k);
    auto bc = out.bias(k);
    for (std::size_t r = 0; r < t.fine_blocks[k].rows; ++r) {
      bc[static_cast<Eigen::Index>(row_t.aggregate[r])] += row_w[r] * b[static_cast<Eigen::Index>(r)];
    }
  }
  return out;
}

}  // namespace

TransferLevel make_transfer_level(const Network& net, std::vector<LayerTransfer> hidden) {
  validate(net);
  TransferLevel t;
  t.fine_blocks = layer_blocks(net);
  const std::size_t layers = t.fine_blocks.size();
  if (hidden.size() + 1 != layers) {
    throw ShapeError("transfer level: got " + std::to_string(hidden.size()) + " hidden interfaces for a " +
                     std::to_string(layers) + "-layer network");
  }
  t.interfaces.reserve(layers + 1);
  t.interfaces.push_back(identity_transfer(t.fine_blocks.front().cols));
  for (std::size_t j = 0; j < hidden.size(); ++j) {
    if (hidden[j].fine_size() != t.fine_blocks[j].rows) {
      throw ShapeError("transfer level: interface " + std::to_string(j + 1) + " covers " +
                       std::to_string(hidden[j].fine_size()) + " units, layer " + std::to_string(j) + " has " +
                       std::to_string(t.fine_blocks[j].rows));
    }
    t.interfaces.push_back(std::move(hidden[j]));
  }
  t.interfaces.push_back(identity_transfer(t.fine_blocks.back().rows));

  t.coarse_blocks.resize(layers);
  for (std::size_t k = 0; k < layers; ++k) {
    t.coarse_blocks[k] = {t.interfaces[k + 1].coarse_size, t.interfaces[k].coarse_size, t.fine_blocks[k].taps};
  }
  t.fine_layout = layout_of(t.fine_blocks);
  t.coarse_layout = layout_of(t.coarse_blocks);
  return t;
}

TransferLevel identity_transfer_level(const Network& net) {
  validate(net);
  std::vector<LayerTransfer> hidden;
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) hidden.push_back(identity_transfer(layer_units(net.layers[k])));
  return make_transfer_level(net, std::move(hidden));
}

RowMatrix unit_rows(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->weights;
  const auto& c = std::get<ConvLayer>(layer);
  return Eigen::Map<const RowMatrix>(c.kernels.data(), c.out_channels,
                                     static_cast<Eigen::Index>(c.in_channels * c.taps()));
}

TransferLevel build_transfer_level(const Network& net, const CoarseningOptions& options, std::mt19937_64* order_rng) {
  validate(net);
  std::vector<LayerTransfer> hidden;
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const RowMatrix rows = unit_rows(net.layers[k]);
    const StrengthMatrix s = strength_from_rows(rows);
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (options.randomize_order && order_rng != nullptr) std::shuffle(order.begin(), order.end(), *order_rng);
    const Matching m = greedy_hem(s, options.theta, order);
    hidden.push_back(build_transfer(m, &rows, options.weighted));
  }
  return make_transfer_level(net, std::move(hidden));
}

ParamVector restrict_params(const TransferLevel& t, const ParamVector& x) {
  return scatter(t, x, ScatterKind::iterate, "restrict_params");
}

ParamVector restrict_gradient(const TransferLevel& t, const ParamVector& grad) {
  return scatter(t, grad, ScatterKind::gradient, "restrict_gradient");
}

ParamVector prolong_params(const TransferLevel& t, const ParamVector& x_coarse) {
  require_layout(x_coarse, *t.coarse_layout, "prolong_params", "coarse");
  ParamVector out(t.fine_layout);
  for (std::size_t k = 0; k < t.layer_count(); ++k) {
    const LayerTransfer& row_t = t.interfaces[k + 1];
    const LayerTransfer& col_t = t.interfaces[k];
    const LayerBlock& fine = t.fine_blocks[k];
    const LayerBlock& coarse = t.coarse_blocks[k];
    const double* src = x_coarse.weights(k).data();
    double* dst = out.weights(k).data();
    for (std::size_t r = 0; r < fine.rows; ++r) {
      const std::size_t rc = row_t.aggregate[r];
      for (std::size_t c = 0; c < fine.cols; ++c) {
        const double w = row_t.p_weight[r] * col_t.pi_weight[c];
        const double* s = src + (rc * coarse.cols + col_t.aggregate[c]) * coarse.taps;
        double* d = dst + (r * fine.cols + c) * fine.taps;
        for (std::size_t tap = 0; tap < fine.taps; ++tap) d[tap] = w * s[tap];
      }
    }
    auto bc = x_coarse.bias(k);
    auto b = out.bias(k);
    for (std::size_t r = 0; r < fine.rows; ++r) {
      b[static_cast<Eigen::Index>(r)] = row_t.p_weight[r] * bc[static_cast<Eigen::Index>(row_t.aggregate[r])];
    }
  }
  return out;
}

ParamVector coarse_grid_correction(const ParamVector& x, const ParamVector& x_coarse_new, const TransferLevel& t,
                                   double alpha) {
  require_layout(x, *t.fine_layout, "coarse_grid_correction", "fine");
  require_layout(x_coarse_new, *t.coarse_layout, "coarse_grid_correction", "coarse");
  ParamVector diff = x_coarse_new;
  diff.values() -= restrict_params(t, x).values();
  return axpy_params(x, alpha, prolong_params(t, diff));
}

Network restrict_network(const Network& net, const TransferLevel& t) {
  validate(net);
  if (!(*param_layout(net) == *t.fine_layout)) {
    throw ShapeError("restrict_network: transfer level was built for a different network shape");
  }
  Network coarse;
  coarse.activation = net.activation;
  coarse.activate_output = net.activate_output;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const LayerBlock& cb = t.coarse_blocks[k];
    if (is_conv(net.layers[k])) {
      ConvLayer c = std::get<ConvLayer>(net.layers[k]);
      c.out_channels = static_cast<int>(cb.rows);
      c.in_channels = static_cast<int>(cb.cols);
      c.kernels.assign(cb.rows * cb.cols * cb.taps, 0.0);
      c.bias = Vector::Zero(static_cast<Eigen::Index>(cb.rows));
      coarse.layers.emplace_back(std::move(c));
    } else {
      coarse.layers.emplace_back(
          DenseLayer{RowMatrix::Zero(static_cast<Eigen::Index>(cb.rows), static_cast<Eigen::Index>(cb.cols * cb.taps)),
                     Vector::Zero(static_cast<Eigen::Index>(cb.rows))});
    }
  }
  unflatten(coarse, restrict_params(t, flatten(net)));
  return coarse;
}

}  // namespace mlfas
