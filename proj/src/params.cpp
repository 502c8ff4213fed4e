#include "mlfas/params.hpp"

#include <string>

#include "mlfas/error.hpp"

namespace mlfas {

ParamLayout::ParamLayout(const std::vector<std::size_t>& weight_counts,
                         const std::vector<std::size_t>& bias_counts) {
  if (weight_counts.size() != bias_counts.size()) {
    throw ShapeError("parameter layout: weight and bias layer counts differ");
  }
  segments_.reserve(2 * weight_counts.size());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < weight_counts.size(); ++k) {
    segments_.push_back({k, SegmentKind::weight, offset, weight_counts[k]});
    offset += weight_counts[k];
  }
  for (std::size_t k = 0; k < bias_counts.size(); ++k) {
    segments_.push_back({k, SegmentKind::bias, offset, bias_counts[k]});
    offset += bias_counts[k];
  }
  total_len_ = offset;
}

ParamVector::ParamVector(std::shared_ptr<const ParamLayout> layout)
    : layout_(std::move(layout)),
      values_(Vector::Zero(static_cast<Eigen::Index>(layout_->total_len()))) {}

ParamVector::ParamVector(std::shared_ptr<const ParamLayout> layout, Vector values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != layout_->total_len()) {
    throw ShapeError("parameter vector has " + std::to_string(values_.size()) +
                     " entries, layout expects " + std::to_string(layout_->total_len()));
  }
}

Eigen::Map<Vector> ParamVector::segment(const Segment& s) {
  return {values_.data() + s.offset, static_cast<Eigen::Index>(s.length)};
}

Eigen::Map<const Vector> ParamVector::segment(const Segment& s) const {
  return {values_.data() + s.offset, static_cast<Eigen::Index>(s.length)};
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (layout_ == other.layout_) return true;
  if (!layout_ || !other.layout_) return false;
  return *layout_ == *other.layout_;
}

namespace {
void require_same_layout(const ParamVector& a, const ParamVector& b, const char* op) {
  if (!a.same_layout(b)) {
    throw ShapeError(std::string(op) + ": parameter layouts differ");
  }
}
}  // namespace

ParamVector axpy_params(const ParamVector& x, double alpha, const ParamVector& d) {
  require_same_layout(x, d, "axpy_params");
  ParamVector out = x;
  out.values() += alpha * d.values();
  return out;
}

double max_abs(const ParamVector& x) {
  return x.size() == 0 ? 0.0 : x.values().cwiseAbs().maxCoeff();
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_layout(a, b, "dot");
  return a.values().dot(b.values());
}

bool all_finite(const ParamVector& x) { return x.values().allFinite(); }

}  // namespace mlfas
