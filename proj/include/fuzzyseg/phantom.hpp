#ifndef FUZZYSEG_PHANTOM_HPP
#define FUZZYSEG_PHANTOM_HPP

#include "fuzzyseg/field.hpp"

#include <cstdint>
#include <vector>

namespace fuzzyseg {

/// Rotated ellipse in pixel coordinates (row = y, col = x). `semi_x` and
/// `semi_y` are the half-axes before rotation by `angle` radians.
struct Ellipse {
  double cy = 0, cx = 0;
  double semi_y = 1, semi_x = 1;
  double angle = 0;

  bool contains(double row, double col) const;
};

struct Disk {
  double cy = 0, cx = 0;
  double radius = 1;
  int bone = 0;  ///< index of the enclosing bone ellipse

  bool contains(double row, double col) const;
};

enum PhantomClass : int { kBackground = 0, kBone = 1, kLesion = 2 };

/// Emission-like phantom: soft tissue at `background`, each bone at a uniform
/// draw of bone_ratio times background, each lesion at lesion_multiplier times
/// its bone level scaled by a uniform draw of lesion_factor.
struct PhantomSpec {
  Index height = 128;
  Index width = 128;
  std::vector<Ellipse> bones;
  std::vector<Disk> lesions;
  double background = 1.0;
  double bone_ratio_lo = 8.0, bone_ratio_hi = 13.0;
  double lesion_multiplier = 4.0;
  double lesion_factor_lo = 0.5, lesion_factor_hi = 1.75;
  Spacing spacing;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PhantomPair {
  ScalarImage<double> image;
  LabelMap truth;  ///< 0 background, 1 bone, 2 lesion
  std::vector<double> bone_levels;
  std::vector<double> lesion_levels;
};

/// Randomized geometry: `bones` ellipses, each lesion a disk fully inside a bone.
PhantomSpec random_spec(Index height, Index width, std::uint64_t seed, int bones = 1, int lesions = 2);

PhantomPair generate(const PhantomSpec& spec);

/// Adds i.i.d. N(0, sigma^2) noise.
ScalarImage<double> add_gaussian(const ScalarImage<double>& img, double sigma, std::uint64_t seed);

/// Replaces each pixel by Poisson(scale * value) / scale. Values must be >= 0.
ScalarImage<double> add_poisson(const ScalarImage<double>& img, double scale, std::uint64_t seed);

}  // namespace fuzzyseg

#endif  // FUZZYSEG_PHANTOM_HPP
