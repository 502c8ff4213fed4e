#pragma once

// Straightforward single-threaded loop implementations of the network
// kernels. They share no code with the optimized paths and serve as the
// oracle in tests and the baseline in the benchmark.

#include "mlfas/network.hpp"

namespace mlfas::reference {

/// Cross-correlation of one sample, written directly from the definition.
std::vector<double> conv_forward(const ConvLayer& layer, const std::vector<double>& input);

Vector forward(const Network& net, const Vector& input);
BatchMatrix forward_batch(const Network& net, const BatchMatrix& inputs);
LossValue loss(const Network& net, const Minibatch& batch);
/// Gradient of the minibatch mean-squared loss, sample by sample.
ParamVector gradient(const Network& net, const Minibatch& batch);

}  // namespace mlfas::reference
