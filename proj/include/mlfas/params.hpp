#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "mlfas/types.hpp"

namespace mlfas {

enum class SegmentKind { weight, bias };

struct Segment {
  std::size_t layer = 0;
  SegmentKind kind = SegmentKind::weight;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Segment&) const = default;
};

/// Unroll order of a parameter vector: every weight segment (layer order)
/// followed by every bias segment (layer order).
class ParamLayout {
 public:
  ParamLayout() = default;
  /// `weight_counts[k]` / `bias_counts[k]` are the sizes of layer k's blocks.
  ParamLayout(const std::vector<std::size_t>& weight_counts,
              const std::vector<std::size_t>& bias_counts);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t total_len() const { return total_len_; }
  std::size_t layer_count() const { return segments_.size() / 2; }
  const Segment& weight(std::size_t layer) const { return segments_[layer]; }
  const Segment& bias(std::size_t layer) const { return segments_[layer_count() + layer]; }

  bool operator==(const ParamLayout&) const = default;

 private:
  std::vector<Segment> segments_;
  std::size_t total_len_ = 0;
};

/// Flat vector of learnable parameters (or anything shaped like them:
/// gradients, momentum, tau corrections).
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::shared_ptr<const ParamLayout> layout);
  ParamVector(std::shared_ptr<const ParamLayout> layout, Vector values);

  const ParamLayout& layout() const { return *layout_; }
  const std::shared_ptr<const ParamLayout>& layout_ptr() const { return layout_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  Eigen::Map<Vector> segment(const Segment& s);
  Eigen::Map<const Vector> segment(const Segment& s) const;
  Eigen::Map<Vector> weights(std::size_t layer) { return segment(layout_->weight(layer)); }
  Eigen::Map<const Vector> weights(std::size_t layer) const { return segment(layout_->weight(layer)); }
  Eigen::Map<Vector> bias(std::size_t layer) { return segment(layout_->bias(layer)); }
  Eigen::Map<const Vector> bias(std::size_t layer) const { return segment(layout_->bias(layer)); }

  bool same_layout(const ParamVector& other) const;
  void set_zero() { values_.setZero(); }

 private:
  std::shared_ptr<const ParamLayout> layout_;
  Vector values_;
};

/// x + alpha * d. Throws ShapeError on layout mismatch.
ParamVector axpy_params(const ParamVector& x, double alpha, const ParamVector& d);

/// Max-norm and dot product over matching layouts.
double max_abs(const ParamVector& x);
double dot(const ParamVector& a, const ParamVector& b);
bool all_finite(const ParamVector& x);

}  // namespace mlfas
