#include "mlfas/coarsening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mlfas/error.hpp"

namespace mlfas {

StrengthMatrix strength_from_rows(const RowMatrix& rows) {
  RowMatrix unit = rows;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const double norm = unit.row(i).norm();
    if (norm > 0.0) {
      unit.row(i) /= norm;
    } else {
      unit.row(i).setZero();
    }
  }
  StrengthMatrix s;
  s.values = unit * unit.transpose();
  s.values = s.values.cwiseMax(-1.0).cwiseMin(1.0);
  s.values.diagonal().setZero();
  return s;
}

Matching identity_matching(std::size_t n) {
  Matching m;
  m.partner.resize(n);
  m.aggregate.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.partner[i] = i;
    m.aggregate[i] = i;
  }
  m.num_aggregates = n;
  return m;
}

Matching greedy_hem(const StrengthMatrix& s, double theta, std::span<const std::size_t> order) {
  const std::size_t n = s.size();
  if (order.size() != n) {
    throw ConfigError("greedy_hem: visit order has " + std::to_string(order.size()) +
                      " entries for " + std::to_string(n) + " units");
  }
  std::vector<char> seen(n, 0);
  for (std::size_t i : order) {
    if (i >= n || seen[i]) throw ConfigError("greedy_hem: visit order is not a permutation");
    seen[i] = 1;
  }

  constexpr std::size_t unmatched = std::numeric_limits<std::size_t>::max();
  Matching m;
  m.partner.assign(n, unmatched);
  m.aggregate.assign(n, 0);
  for (std::size_t i : order) {
    if (m.partner[i] != unmatched) continue;
    std::size_t best = unmatched;
    double best_s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || m.partner[j] != unmatched) continue;
      const double sij = s(i, j);
      if (sij > theta && (best == unmatched || sij > best_s)) {
        best = j;
        best_s = sij;
      }
    }
    if (best != unmatched) {
      m.partner[i] = best;
      m.partner[best] = i;
      m.aggregate[i] = m.num_aggregates;
      m.aggregate[best] = m.num_aggregates;
    } else {
      m.partner[i] = i;
      m.aggregate[i] = m.num_aggregates;
    }
    ++m.num_aggregates;
  }
  return m;
}

Matching greedy_hem(const StrengthMatrix& s, double theta) {
  std::vector<std::size_t> order(s.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return greedy_hem(s, theta, order);
}

bool LayerTransfer::is_identity() const {
  if (coarse_size != fine_size()) return false;
  for (std::size_t i = 0; i < fine_size(); ++i) {
    if (aggregate[i] != i || p_weight[i] != 1.0 || pi_weight[i] != 1.0) return false;
  }
  return true;
}

Eigen::SparseMatrix<double> LayerTransfer::p_matrix() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(fine_size());
  for (std::size_t i = 0; i < fine_size(); ++i) {
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(aggregate[i]), p_weight[i]);
  }
  Eigen::SparseMatrix<double> p(static_cast<Eigen::Index>(fine_size()),
                                static_cast<Eigen::Index>(coarse_size));
  p.setFromTriplets(triplets.begin(), triplets.end());
  return p;
}

Eigen::SparseMatrix<double> LayerTransfer::pi_matrix() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(fine_size());
  for (std::size_t i = 0; i < fine_size(); ++i) {
    triplets.emplace_back(static_cast<int>(aggregate[i]), static_cast<int>(i), pi_weight[i]);
  }
  Eigen::SparseMatrix<double> pi(static_cast<Eigen::Index>(coarse_size),
                                 static_cast<Eigen::Index>(fine_size()));
  pi.setFromTriplets(triplets.begin(), triplets.end());
  return pi;
}

LayerTransfer identity_transfer(std::size_t n) {
  return build_transfer(identity_matching(n), nullptr, false);
}

LayerTransfer build_transfer(const Matching& matching, const RowMatrix* rows, bool weighted) {
  const std::size_t n = matching.size();
  LayerTransfer t;
  t.aggregate = matching.aggregate;
  t.coarse_size = matching.num_aggregates;
  t.weighted = weighted;
  t.p_weight.assign(n, 1.0);
  t.pi_weight.assign(n, 0.0);

  if (weighted) {
    if (rows == nullptr || static_cast<std::size_t>(rows->rows()) != n) {
      throw ShapeError("build_transfer: weighted transfer needs one row per unit");
    }
    t.row_norms.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d = rows->row(static_cast<Eigen::Index>(i)).norm();
      if (!(d > 0.0)) {
        d = 1.0;
        ++t.zero_norm_fallbacks;
      }
      t.row_norms[i] = d;
      t.p_weight[i] = d;
    }
  }

  // (P^T D P) is diagonal: per-aggregate sum of the P weights.
  std::vector<double> diag(t.coarse_size, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (t.aggregate[i] >= t.coarse_size) throw ShapeError("build_transfer: aggregate index out of range");
    diag[t.aggregate[i]] += weighted ? t.p_weight[i] : 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) t.pi_weight[i] = 1.0 / diag[t.aggregate[i]];
  return t;
}

namespace {
void require_length(const char* op, std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeError(std::string(op) + ": vector length " + std::to_string(got) + ", expected " +
                     std::to_string(want));
  }
}
}  // namespace

Vector apply_pi(const LayerTransfer& t, const Vector& fine) {
  require_length("apply_pi", static_cast<std::size_t>(fine.size()), t.fine_size());
  Vector out = Vector::Zero(static_cast<Eigen::Index>(t.coarse_size));
  for (std::size_t i = 0; i < t.fine_size(); ++i) {
    out[static_cast<Eigen::Index>(t.aggregate[i])] += t.pi_weight[i] * fine[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Vector apply_p(const LayerTransfer& t, const Vector& coarse) {
  require_length("apply_p", static_cast<std::size_t>(coarse.size()), t.coarse_size);
  Vector out(static_cast<Eigen::Index>(t.fine_size()));
  for (std::size_t i = 0; i < t.fine_size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = t.p_weight[i] * coarse[static_cast<Eigen::Index>(t.aggregate[i])];
  }
  return out;
}

Vector apply_p_transpose(const LayerTransfer& t, const Vector& fine) {
  require_length("apply_p_transpose", static_cast<std::size_t>(fine.size()), t.fine_size());
  Vector out = Vector::Zero(static_cast<Eigen::Index>(t.coarse_size));
  for (std::size_t i = 0; i < t.fine_size(); ++i) {
    out[static_cast<Eigen::Index>(t.aggregate[i])] += t.p_weight[i] * fine[static_cast<Eigen::Index>(i)];
  }
  return out;
}

std::vector<std::size_t> aggregate_sizes(const LayerTransfer& t) {
  std::vector<std::size_t> sizes(t.coarse_size, 0);
  for (std::size_t a : t.aggregate) ++sizes[a];
  return sizes;
}

}  // namespace mlfas
