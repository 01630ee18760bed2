#ifndef FUZZYSEG_FIELD_HPP
#define FUZZYSEG_FIELD_HPP

#include "fuzzyseg/types.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace fuzzyseg {

/// Tolerance on per-pixel membership sums.
inline constexpr double kMembershipSumTolerance = 1e-6;

/// H x W intensity image with physical pixel spacing. Immutable.
template <typename Scalar = double>
class ScalarImage {
 public:
  ScalarImage() = default;

  explicit ScalarImage(PlaneArray<Scalar> pixels, Spacing spacing = {})
      : pixels_(std::move(pixels)), spacing_(spacing) {
    if (!(spacing_.dy > 0.0) || !(spacing_.dx > 0.0)) throw usage_error("spacing must be positive");
    if (!pixels_.allFinite()) throw usage_error("image contains non-finite values");
  }

  Index height() const { return pixels_.rows(); }
  Index width() const { return pixels_.cols(); }
  Index size() const { return pixels_.size(); }
  const Spacing& spacing() const { return spacing_; }
  const PlaneArray<Scalar>& pixels() const { return pixels_; }

  Scalar operator()(Index row, Index col) const { return pixels_(row, col); }
  /// Row-major flat access.
  Scalar operator[](Index j) const { return pixels_.data()[j]; }

  /// Flat row-major view, one entry per pixel.
  Eigen::Map<const Vector<Scalar>> flat() const { return {pixels_.data(), pixels_.size()}; }

  template <typename Other>
  ScalarImage<Other> cast() const {
    return ScalarImage<Other>(pixels_.template cast<Other>(), spacing_);
  }

 private:
  PlaneArray<Scalar> pixels_;
  Spacing spacing_;
};

/// H x W x C probability field, pixel-major with channels contiguous.
///
/// Every value lies in [0, 1] and each pixel's channels sum to one within
/// kMembershipSumTolerance. The invariant is checked on construction.
template <typename Scalar = double>
class MembershipField {
 public:
  MembershipField() = default;

  MembershipField(Index height, Index width, ChannelArray<Scalar> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.cols() < 2) throw usage_error("membership field needs at least 2 classes");
    if (values_.rows() != height_ * width_) throw usage_error("membership field shape mismatch");
    for (Index j = 0; j < values_.rows(); ++j) {
      Scalar sum = 0;
      for (Index k = 0; k < values_.cols(); ++k) {
        const Scalar v = values_(j, k);
        if (!(v >= Scalar(0) && v <= Scalar(1))) throw usage_error("membership value outside [0,1]");
        sum += v;
      }
      if (std::abs(static_cast<double>(sum) - 1.0) > kMembershipSumTolerance)
        throw usage_error("membership channels do not sum to one");
    }
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index pixels() const { return values_.rows(); }
  Index classes() const { return values_.cols(); }
  const ChannelArray<Scalar>& values() const { return values_; }
  Scalar operator()(Index j, Index k) const { return values_(j, k); }

 private:
  Index height_ = 0;
  Index width_ = 0;
  ChannelArray<Scalar> values_;
};

/// Hard class assignment per pixel.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(LabelArray labels, int classes) : labels_(std::move(labels)), classes_(classes) {
    if (classes_ < 1) throw usage_error("label map needs at least one class");
    if (labels_.size() > 0 && (labels_.minCoeff() < 0 || labels_.maxCoeff() >= classes_))
      throw usage_error("label outside [0, classes)");
  }

  Index height() const { return labels_.rows(); }
  Index width() const { return labels_.cols(); }
  Index size() const { return labels_.size(); }
  int classes() const { return classes_; }
  const LabelArray& labels() const { return labels_; }
  int operator()(Index row, Index col) const { return labels_(row, col); }
  int operator[](Index j) const { return labels_.data()[j]; }

  bool operator==(const LabelMap& other) const {
    return classes_ == other.classes_ && labels_.rows() == other.labels_.rows() &&
           labels_.cols() == other.labels_.cols() && (labels_ == other.labels_).all();
  }

 private:
  LabelArray labels_;
  int classes_ = 0;
};

/// One-hot ground truth: a membership field whose channels are binary masks.
template <typename Scalar = double>
class GroundTruth {
 public:
  GroundTruth() = default;
  explicit GroundTruth(MembershipField<Scalar> one_hot) : field_(std::move(one_hot)) {
    const auto& v = field_.values();
    if (!((v == Scalar(0)) || (v == Scalar(1))).all()) throw usage_error("ground truth channels must be binary");
  }

  const MembershipField<Scalar>& field() const { return field_; }
  const ChannelArray<Scalar>& values() const { return field_.values(); }
  Index height() const { return field_.height(); }
  Index width() const { return field_.width(); }
  Index classes() const { return field_.classes(); }

 private:
  MembershipField<Scalar> field_;
};

namespace detail {

template <typename Scalar>
void require_distinct(const ScalarImage<Scalar>& img, const char* message) {
  if (img.size() == 0 || img.pixels().maxCoeff() == img.pixels().minCoeff()) throw numerical_error(message);
}

}  // namespace detail

/// (y - mean) / std with the population standard deviation.
template <typename Scalar>
ScalarImage<Scalar> normalize_zscore(const ScalarImage<Scalar>& img) {
  detail::require_distinct(img, "zero variance");
  const Index n = img.size();
  long double sum = 0;
  for (Index j = 0; j < n; ++j) sum += img[j];
  const long double mean = sum / n;
  long double ss = 0;
  for (Index j = 0; j < n; ++j) {
    const long double d = img[j] - mean;
    ss += d * d;
  }
  const long double sd = std::sqrt(ss / n);
  if (!(sd > 0)) throw numerical_error("zero variance");
  PlaneArray<Scalar> out(img.height(), img.width());
  for (Index j = 0; j < n; ++j) out.data()[j] = static_cast<Scalar>((img[j] - mean) / sd);
  return ScalarImage<Scalar>(std::move(out), img.spacing());
}

/// Affine map onto [0, 1].
template <typename Scalar>
ScalarImage<Scalar> normalize_unit(const ScalarImage<Scalar>& img) {
  detail::require_distinct(img, "zero range");
  const Scalar lo = img.pixels().minCoeff();
  const Scalar range = img.pixels().maxCoeff() - lo;
  PlaneArray<Scalar> out = (img.pixels() - lo) / range;
  return ScalarImage<Scalar>(std::move(out), img.spacing());
}

template <typename Scalar>
ScalarImage<Scalar> gamma_correct(const ScalarImage<Scalar>& img, double gamma) {
  if (!(gamma > 0.0)) throw usage_error("gamma must be positive");
  if (img.size() > 0 && (img.pixels().minCoeff() < Scalar(0) || img.pixels().maxCoeff() > Scalar(1)))
    throw usage_error("gamma correction expects values in [0,1]");
  PlaneArray<Scalar> out = img.pixels().pow(static_cast<Scalar>(gamma));
  return ScalarImage<Scalar>(std::move(out), img.spacing());
}

/// Maximum-membership classification; ties go to the lowest class index.
template <typename Scalar>
LabelMap hard_classify(const MembershipField<Scalar>& f) {
  LabelArray labels(f.height(), f.width());
  const auto& v = f.values();
  for (Index j = 0; j < f.pixels(); ++j) {
    Index best = 0;
    for (Index k = 1; k < f.classes(); ++k)
      if (v(j, k) > v(j, best)) best = k;
    labels.data()[j] = static_cast<int>(best);
  }
  return LabelMap(std::move(labels), static_cast<int>(f.classes()));
}

template <typename Scalar = double>
GroundTruth<Scalar> one_hot(const LabelMap& labels, int classes) {
  if (classes < 2) throw usage_error("one-hot encoding needs at least 2 classes");
  ChannelArray<Scalar> v = ChannelArray<Scalar>::Zero(labels.size(), classes);
  for (Index j = 0; j < labels.size(); ++j) {
    const int label = labels[j];
    if (label < 0 || label >= classes) throw usage_error("label " + std::to_string(label) + " out of range");
    v(j, label) = Scalar(1);
  }
  return GroundTruth<Scalar>(MembershipField<Scalar>(labels.height(), labels.width(), std::move(v)));
}

}  // namespace fuzzyseg

#endif  // FUZZYSEG_FIELD_HPP
