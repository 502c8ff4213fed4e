#pragma once

// Batched layer kernels. Parallelism is over samples: batches are split into
// fixed-size chunks, each chunk runs serially, and reductions over chunks are
// summed in chunk order.

#include <cstddef>

#include "mlfas/network.hpp"

namespace mlfas::kernels {

/// Samples per chunk for the parallel gradient and forward kernels.
inline constexpr std::size_t chunk_size = 64;

/// Pre-activations W y + b for every column of `in`.
BatchMatrix layer_forward(const Layer& layer, const BatchMatrix& in);

/// Accumulates dL/dW and dL/db into `weight_grad` / `bias_grad` (layer layout)
/// and, when `input_grad` is non-null, writes dL/d(in).
void layer_backward(const Layer& layer, const BatchMatrix& in, const BatchMatrix& delta, double* weight_grad,
                    double* bias_grad, BatchMatrix* input_grad);

/// Activation applied in place; `apply_derivative` multiplies `delta` by phi'(z).
void activate(const Activation& act, BatchMatrix& z);
void apply_derivative(const Activation& act, const BatchMatrix& z, BatchMatrix& delta);

/// Forward pass of the whole network over a batch, parallel over chunks.
BatchMatrix forward_batch(const Network& net, const BatchMatrix& inputs);

/// Per-chunk gradient of sum-of-squares scaled by `scale`, plus the chunk's
/// squared error sum and max abs error.
struct ChunkGradient {
  Vector gradient;
  double squared_error = 0.0;
  double max_error = 0.0;
};
ChunkGradient chunk_gradient(const Network& net, const ParamLayout& layout, const BatchMatrix& inputs,
                             const BatchMatrix& targets, double scale);

}  // namespace mlfas::kernels
