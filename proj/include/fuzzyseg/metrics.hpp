#ifndef FUZZYSEG_METRICS_HPP
#define FUZZYSEG_METRICS_HPP

#include "fuzzyseg/field.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fuzzyseg {

using MaskArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(MaskArray bits, Spacing spacing = {});

  Index height() const { return bits_.rows(); }
  Index width() const { return bits_.cols(); }
  const MaskArray& bits() const { return bits_; }
  const Spacing& spacing() const { return spacing_; }
  bool operator()(Index row, Index col) const { return bits_(row, col); }
  Index count() const { return bits_.count(); }

 private:
  MaskArray bits_;
  Spacing spacing_;
};

/// Pixels carrying `label`.
BinaryMask mask_of(const LabelMap& labels, int label, Spacing spacing = {});

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
};

Confusion confusion(const BinaryMask& pred, const BinaryMask& truth);

// Overlap scores. A score whose denominator is empty is 1 when both masks are
// empty and 0 otherwise.
double dsc(const Confusion& c);
double iou(const Confusion& c);
double recall(const Confusion& c);
double precision(const Confusion& c);

inline double dsc(const BinaryMask& p, const BinaryMask& t) { return dsc(confusion(p, t)); }
inline double iou(const BinaryMask& p, const BinaryMask& t) { return iou(confusion(p, t)); }
inline double recall(const BinaryMask& p, const BinaryMask& t) { return recall(confusion(p, t)); }
inline double precision(const BinaryMask& p, const BinaryMask& t) { return precision(confusion(p, t)); }

struct Pixel {
  Index row = 0;
  Index col = 0;
  bool operator==(const Pixel&) const = default;
};

/// Foreground pixels with at least one face neighbor that is background or outside the image.
std::vector<Pixel> boundary(const BinaryMask& mask);

/// Exact Euclidean distance from every pixel center to the nearest point, in
/// physical units (row step dy, column step dx). +inf everywhere if `points` is empty.
PlaneArray<double> distance_field(const std::vector<Pixel>& points, Index height, Index width, Spacing spacing = {});

/// Squared version of distance_field; exact for integer lattices with unit spacing.
PlaneArray<double> squared_distance_field(const std::vector<Pixel>& points, Index height, Index width,
                                          Spacing spacing = {});

/// Fraction of both boundaries lying within `tau` of the other boundary.
/// Both masks empty gives 1.
double surface_dsc(const BinaryMask& pred, const BinaryMask& truth, double tau);

/// sum_i (v_i / sum v) s_i
double weighted_average(const std::vector<double>& scores, const std::vector<double>& volumes);

struct ClassSpec {
  int label = 0;
  std::string name;
  double tau = 1.0;  ///< surface tolerance in physical units
};

/// Tolerances of one voxel width for lesion and two for bone.
std::vector<ClassSpec> default_class_specs(Spacing spacing = {});

struct ClassScores {
  ClassSpec spec;
  double dsc = 0;
  double recall = 0;
  double precision = 0;
  double iou = 0;
  double surface_dsc = 0;
  double volume = 0;  ///< ground-truth pixel count times pixel area
};

struct MetricReport {
  std::vector<ClassScores> per_class;
};

MetricReport evaluate(const LabelMap& pred, const LabelMap& truth, const std::vector<ClassSpec>& classes,
                      Spacing spacing = {});

/// Combines per-image reports: overlap scores by ground-truth-volume weighting,
/// surface DSC by plain mean. Classes with zero total volume fall back to the plain mean.
MetricReport aggregate(const std::vector<MetricReport>& reports);

/// Pixels whose label differs from every in-image 4-neighbor.
Index isolated_pixels(const LabelMap& labels);

}  // namespace fuzzyseg

#endif  // FUZZYSEG_METRICS_HPP
