#pragma once

// Random problem generators and independent oracles shared by the unit tests
// and the acceptance suite.

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "mlfas/coarsening.hpp"
#include "mlfas/conv.hpp"
#include "mlfas/kernels.hpp"
#include "mlfas/network.hpp"
#include "mlfas/transfer.hpp"

namespace mlfas::testing {

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct RandomNetOptions {
  int min_hidden = 1;
  int max_hidden = 3;
  int min_width = 4;
  int max_width = 32;
  bool conv = false;  // start with 1-2 conv layers
  int output_size = 0;  // 0 draws 1..4
};

/// Random dense or conv-then-dense network drawn from `rng`.
inline Network random_network(std::mt19937_64& rng, const RandomNetOptions& o = {}) {
  NetworkSpec spec;
  const int hidden = uniform_int(rng, o.min_hidden, o.max_hidden);
  if (o.conv) {
    spec.input = {uniform_int(rng, 1, 3), uniform_int(rng, 5, 8), uniform_int(rng, 5, 8)};
    int h = spec.input.height, w = spec.input.width;
    const int conv_layers = std::min(hidden, uniform_int(rng, 1, 2));
    for (int i = 0; i < conv_layers; ++i) {
      const int pad = uniform_int(rng, 0, 1);
      const int kernel = uniform_int(rng, 1, std::min(3, std::min(h, w) + 2 * pad));
      const int stride = uniform_int(rng, 1, 2);
      spec.hidden.push_back(LayerSpec::conv(uniform_int(rng, 2, 6), kernel, stride, pad));
      h = (h + 2 * pad - kernel) / stride + 1;
      w = (w + 2 * pad - kernel) / stride + 1;
    }
    for (int i = conv_layers; i < hidden; ++i) {
      spec.hidden.push_back(LayerSpec::dense(uniform_int(rng, o.min_width, o.max_width)));
    }
  } else {
    spec.input = {1, 1, uniform_int(rng, o.min_width, o.max_width)};
    for (int i = 0; i < hidden; ++i) spec.hidden.push_back(LayerSpec::dense(uniform_int(rng, o.min_width, o.max_width)));
  }
  spec.output_size = o.output_size > 0 ? static_cast<std::size_t>(o.output_size)
                                       : static_cast<std::size_t>(uniform_int(rng, 1, 4));
  return make_network(spec, rng());
}

inline Minibatch random_batch(std::mt19937_64& rng, const Network& net, int size) {
  Minibatch b{BatchMatrix(static_cast<Eigen::Index>(net.input_size()), size),
              BatchMatrix(static_cast<Eigen::Index>(net.output_size()), size)};
  for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = uniform(rng);
  for (Eigen::Index i = 0; i < b.targets.size(); ++i) b.targets.data()[i] = uniform(rng);
  return b;
}

inline ParamVector random_params(std::mt19937_64& rng, std::shared_ptr<const ParamLayout> layout) {
  ParamVector x(std::move(layout));
  for (Eigen::Index i = 0; i < x.values().size(); ++i) x.values()[i] = uniform(rng);
  return x;
}

/// Smallest |pre-activation| of any hidden (or activated output) unit over the batch.
inline double min_kink_distance(const Network& net, const Minibatch& batch) {
  double best = std::numeric_limits<double>::infinity();
  BatchMatrix a = batch.inputs;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    BatchMatrix z = kernels::layer_forward(net.layers[k], a);
    const bool last = k + 1 == net.layers.size();
    if (!last || net.activate_output) best = std::min(best, z.cwiseAbs().minCoeff());
    if (!last || net.activate_output) kernels::activate(net.activation, z);
    a = std::move(z);
  }
  return best;
}

/// Random pairing of a random subset of units; the rest are singletons.
inline Matching random_matching(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Matching m;
  m.partner.resize(n);
  std::iota(m.partner.begin(), m.partner.end(), std::size_t{0});
  for (std::size_t i = 0; i + 1 < n; i += 2) {
    if (uniform(rng, 0.0, 1.0) < 0.75) {
      m.partner[perm[i]] = perm[i + 1];
      m.partner[perm[i + 1]] = perm[i];
    }
  }
  m.aggregate.assign(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (m.aggregate[i] != n) continue;
    m.aggregate[i] = m.num_aggregates;
    m.aggregate[m.partner[i]] = m.num_aggregates;
    ++m.num_aggregates;
  }
  return m;
}

/// Transfer level with random matchings on every hidden interface; weighted
/// transfers use the actual unit rows.
inline TransferLevel random_transfer_level(std::mt19937_64& rng, const Network& net, bool weighted) {
  std::vector<LayerTransfer> hidden;
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const RowMatrix rows = unit_rows(net.layers[k]);
    hidden.push_back(build_transfer(random_matching(rng, static_cast<std::size_t>(rows.rows())), &rows, weighted));
  }
  return make_transfer_level(net, std::move(hidden));
}

using SparseMatrix = Eigen::SparseMatrix<double>;

inline SparseMatrix sparse_identity(Eigen::Index n) {
  SparseMatrix i(n, n);
  i.setIdentity();
  return i;
}

inline SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Eigen::Triplet<double>> t;
  for (int ka = 0; ka < a.outerSize(); ++ka) {
    for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia) {
      for (int kb = 0; kb < b.outerSize(); ++kb) {
        for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib) {
          t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(), ia.value() * ib.value());
        }
      }
    }
  }
  SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

/// Block-diagonal assembly in parameter-layout order: weights of every layer,
/// then biases of every layer.
inline SparseMatrix block_diagonal(const std::vector<SparseMatrix>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  std::vector<Eigen::Triplet<double>> t;
  Eigen::Index r0 = 0, c0 = 0;
  for (const auto& b : blocks) {
    for (int k = 0; k < b.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(b, k); it; ++it) t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
    }
    r0 += b.rows();
    c0 += b.cols();
  }
  SparseMatrix out(rows, cols);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

/// Explicit matrices of Pi, P and R for a transfer level. With row-major
/// weight blocks W (rows x cols x taps), vec(A W B) = (A kron B^T kron I) vec(W).
struct ExplicitOperators {
  SparseMatrix restrict_params;  // Pi
  SparseMatrix prolong;          // P
  SparseMatrix restrict_grad;    // R
};

inline ExplicitOperators explicit_operators(const TransferLevel& t) {
  std::vector<SparseMatrix> pi_w, p_w, r_w, pi_b, p_b, r_b;
  for (std::size_t k = 0; k < t.layer_count(); ++k) {
    const SparseMatrix pi_out = t.interfaces[k + 1].pi_matrix();
    const SparseMatrix p_out = t.interfaces[k + 1].p_matrix();
    const SparseMatrix pi_in = t.interfaces[k].pi_matrix();
    const SparseMatrix p_in = t.interfaces[k].p_matrix();
    const SparseMatrix taps = sparse_identity(static_cast<Eigen::Index>(t.fine_blocks[k].taps));
    pi_w.push_back(kron(pi_out, kron(SparseMatrix(p_in.transpose()), taps)));
    p_w.push_back(kron(p_out, kron(SparseMatrix(pi_in.transpose()), taps)));
    r_w.push_back(kron(SparseMatrix(p_out.transpose()), kron(pi_in, taps)));
    pi_b.push_back(pi_out);
    p_b.push_back(p_out);
    r_b.push_back(SparseMatrix(p_out.transpose()));
  }
  auto join = [](std::vector<SparseMatrix> w, const std::vector<SparseMatrix>& b) {
    w.insert(w.end(), b.begin(), b.end());
    return block_diagonal(w);
  };
  return {join(pi_w, pi_b), join(p_w, p_b), join(r_w, r_b)};
}

/// Central finite difference of the minibatch loss along coordinate `i`.
inline double finite_difference(const Network& net, const Minibatch& batch, std::size_t i, double h = 1e-5) {
  ParamVector x = flatten(net);
  Network probe = net;
  x.values()[static_cast<Eigen::Index>(i)] += h;
  unflatten(probe, x);
  const double up = loss(probe, batch).l2;
  x.values()[static_cast<Eigen::Index>(i)] -= 2.0 * h;
  unflatten(probe, x);
  const double down = loss(probe, batch).l2;
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps coordinates whose gradient
/// is essentially zero from dominating through cancellation noise.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace mlfas::testing
