#pragma once

// Network-level transfer operators. With per-interface pairs (pi_k, P_k):
//
//   Pi x  = [ pi_{k+1} W_k P_k ,  pi_{k+1} b_k ]      restriction of iterates
//   P x_c = [ P_{k+1} W_k pi_k ,  P_{k+1} b_k ]       prolongation
//   R x   = [ P_{k+1}^T W_k pi_k^T , P_{k+1}^T b_k ]  = P^T, restriction of gradients
//
// Interface 0 (network input) and the last interface (network output) are
// always the identity.

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "mlfas/coarsening.hpp"
#include "mlfas/network.hpp"

namespace mlfas {

struct CoarseningOptions {
  double theta = 0.1;
  bool weighted = true;
  /// Visit units in a random order (drawn from the caller's generator)
  /// instead of index order.
  bool randomize_order = false;
};

/// Layer k's weights viewed as a rows x cols x taps array: rows are the units
/// of interface k+1, cols the units of interface k, taps the kernel positions
/// (conv) or spatial positions of a flattened conv output (dense after conv).
struct LayerBlock {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t taps = 1;
};

struct TransferLevel {
  std::vector<LayerTransfer> interfaces;  // one per interface 0..L
  std::vector<LayerBlock> fine_blocks;
  std::vector<LayerBlock> coarse_blocks;
  std::shared_ptr<const ParamLayout> fine_layout;
  std::shared_ptr<const ParamLayout> coarse_layout;

  std::size_t layer_count() const { return fine_blocks.size(); }
  std::size_t fine_parameter_count() const { return fine_layout->total_len(); }
  std::size_t coarse_parameter_count() const { return coarse_layout->total_len(); }
};

/// Blocks of every layer of `net` (rows, cols, taps).
std::vector<LayerBlock> layer_blocks(const Network& net);

/// Wraps explicit hidden-interface transfers. `hidden[j]` is interface j+1;
/// input and output interfaces are filled in as identities.
TransferLevel make_transfer_level(const Network& net, std::vector<LayerTransfer> hidden);

/// All-identity level (coarse network equals fine network).
TransferLevel identity_transfer_level(const Network& net);

/// Matches the units of every hidden interface by heavy-edge matching over
/// the rows of the layer producing them, then builds (pi, P).
TransferLevel build_transfer_level(const Network& net, const CoarseningOptions& options,
                                   std::mt19937_64* order_rng = nullptr);

/// The weight rows used as similarity vectors for the units layer k produces.
RowMatrix unit_rows(const Layer& layer);

ParamVector restrict_params(const TransferLevel& t, const ParamVector& x);
ParamVector prolong_params(const TransferLevel& t, const ParamVector& x_coarse);
ParamVector restrict_gradient(const TransferLevel& t, const ParamVector& grad);

/// x + alpha * P (x_c_new - Pi x). Also used verbatim for momentum vectors.
ParamVector coarse_grid_correction(const ParamVector& x, const ParamVector& x_coarse_new, const TransferLevel& t,
                                   double alpha);

/// Coarse network with the same layer kinds, activation and conv geometry,
/// reduced widths/channels, and parameters Pi flatten(net).
Network restrict_network(const Network& net, const TransferLevel& t);

}  // namespace mlfas
