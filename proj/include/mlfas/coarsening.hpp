#pragma once

// Strength of connection, greedy heavy-edge matching and the per-interface
// transfer pair (pi, P) built from a matching.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "mlfas/types.hpp"

namespace mlfas {

/// Symmetric matrix of cosine similarities between units. The diagonal is
/// stored as zero and never consulted.
struct StrengthMatrix {
  Eigen::MatrixXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// Cosine of the angle between every pair of rows. Rows with zero norm get
/// similarity 0 with everything.
StrengthMatrix strength_from_rows(const RowMatrix& rows);

/// Result of a pairwise matching. `partner` is an involution (singletons map
/// to themselves); `aggregate` numbers aggregates 0..num_aggregates-1 in the
/// order they were formed.
struct Matching {
  std::vector<std::size_t> partner;
  std::vector<std::size_t> aggregate;
  std::size_t num_aggregates = 0;

  std::size_t size() const { return partner.size(); }
};

Matching identity_matching(std::size_t n);

/// Greedy heavy-edge matching. Units are visited in `order`; an unmatched unit
/// pairs with the unmatched unit of largest similarity strictly above `theta`
/// (smallest index on ties), otherwise it stays a singleton.
Matching greedy_hem(const StrengthMatrix& s, double theta, std::span<const std::size_t> order);
Matching greedy_hem(const StrengthMatrix& s, double theta);

/// Transfer pair for one interface between layers. Both P (fine x coarse) and
/// pi (coarse x fine) have exactly one nonzero per fine unit, in column/row
/// `aggregate[i]`, so they are stored as three parallel arrays.
struct LayerTransfer {
  std::vector<std::size_t> aggregate;
  std::vector<double> p_weight;   // P(i, aggregate[i])
  std::vector<double> pi_weight;  // pi(aggregate[i], i)
  std::size_t coarse_size = 0;
  bool weighted = false;
  std::vector<double> row_norms;  // diagonal of D when weighted
  std::size_t zero_norm_fallbacks = 0;

  std::size_t fine_size() const { return aggregate.size(); }
  bool is_identity() const;

  Eigen::SparseMatrix<double> p_matrix() const;
  Eigen::SparseMatrix<double> pi_matrix() const;
};

LayerTransfer identity_transfer(std::size_t n);

/// Plain (pairwise averaging / piecewise-constant) or row-norm weighted pair.
/// `rows` must be given when `weighted`; rows with zero norm use weight 1.
LayerTransfer build_transfer(const Matching& matching, const RowMatrix* rows, bool weighted);

Vector apply_pi(const LayerTransfer& t, const Vector& fine);
Vector apply_p(const LayerTransfer& t, const Vector& coarse);
Vector apply_p_transpose(const LayerTransfer& t, const Vector& fine);

/// Sizes of every aggregate, indexed by aggregate number.
std::vector<std::size_t> aggregate_sizes(const LayerTransfer& t);

}  // namespace mlfas
