#include "fuzzyseg/phantom.hpp"

#include "fuzzyseg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fuzzyseg {

namespace {

bool disk_inside(const Disk& d, const Ellipse& e, Index height, Index width) {
  const auto r0 = static_cast<Index>(std::max(0.0, std::floor(d.cy - d.radius)));
  const auto r1 = static_cast<Index>(std::min(static_cast<double>(height - 1), std::ceil(d.cy + d.radius)));
  const auto c0 = static_cast<Index>(std::max(0.0, std::floor(d.cx - d.radius)));
  const auto c1 = static_cast<Index>(std::min(static_cast<double>(width - 1), std::ceil(d.cx + d.radius)));
  for (Index r = r0; r <= r1; ++r)
    for (Index c = c0; c <= c1; ++c) {
      const auto y = static_cast<double>(r), x = static_cast<double>(c);
      if (d.contains(y, x) && !e.contains(y, x)) return false;
    }
  return true;
}

}  // namespace

bool Ellipse::contains(double row, double col) const {
  const double dx = col - cx, dy = row - cy;
  const double u = dx * std::cos(angle) + dy * std::sin(angle);
  const double v = -dx * std::sin(angle) + dy * std::cos(angle);
  return (u * u) / (semi_x * semi_x) + (v * v) / (semi_y * semi_y) <= 1.0;
}

bool Disk::contains(double row, double col) const {
  const double dx = col - cx, dy = row - cy;
  return dx * dx + dy * dy <= radius * radius;
}

void PhantomSpec::validate() const {
  if (height < 1 || width < 1) throw usage_error("phantom must have positive size");
  if (!(background > 0.0)) throw usage_error("background level must be positive");
  if (!(bone_ratio_lo > 0.0 && bone_ratio_hi >= bone_ratio_lo)) throw usage_error("bad bone ratio range");
  if (!(lesion_factor_lo > 0.0 && lesion_factor_hi >= lesion_factor_lo)) throw usage_error("bad lesion factor range");
  if (!(lesion_multiplier > 0.0)) throw usage_error("lesion multiplier must be positive");
  for (const Ellipse& e : bones)
    if (!(e.semi_x > 0.0 && e.semi_y > 0.0)) throw usage_error("bone axes must be positive");
  for (const Disk& d : lesions) {
    if (d.bone < 0 || d.bone >= static_cast<int>(bones.size())) throw usage_error("lesion refers to a missing bone");
    if (!(d.radius > 0.0)) throw usage_error("lesion radius must be positive");
    if (!disk_inside(d, bones[static_cast<std::size_t>(d.bone)], height, width))
      throw usage_error("lesion lies outside its bone");
  }
}

PhantomSpec random_spec(Index height, Index width, std::uint64_t seed, int bones, int lesions) {
  PhantomSpec spec;
  spec.height = height;
  spec.width = width;
  spec.seed = seed;
  CounterRng rng(seed, 0x67656F);
  const double size = static_cast<double>(std::min(height, width));
  for (int b = 0; b < bones; ++b) {
    Ellipse e;
    e.semi_x = rng.uniform(0.16, 0.30) * size;
    e.semi_y = rng.uniform(0.10, 0.20) * size;
    const double reach = std::max(e.semi_x, e.semi_y);
    e.cy = rng.uniform(reach, static_cast<double>(height) - 1.0 - reach);
    e.cx = rng.uniform(reach, static_cast<double>(width) - 1.0 - reach);
    e.angle = rng.uniform(0.0, std::numbers::pi);
    spec.bones.push_back(e);
  }
  if (bones == 0) return spec;
  for (int i = 0; i < lesions; ++i) {
    const int host = i % bones;
    const Ellipse& e = spec.bones[static_cast<std::size_t>(host)];
    const double inner = std::min(e.semi_x, e.semi_y);
    // Draw in the ellipse's own frame, then confirm on the raster; a rejected
    // draw is retried with a smaller disk.
    for (int attempt = 0;; ++attempt) {
      Disk d;
      d.bone = host;
      d.radius = rng.uniform(0.18, 0.35) * inner * std::pow(0.9, attempt);
      const double ru = std::max(0.0, e.semi_x - d.radius - 1.0) * 0.6;
      const double rv = std::max(0.0, e.semi_y - d.radius - 1.0) * 0.6;
      const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double rho = std::sqrt(rng.uniform());
      const double u = ru * rho * std::cos(t), v = rv * rho * std::sin(t);
      d.cx = e.cx + u * std::cos(e.angle) - v * std::sin(e.angle);
      d.cy = e.cy + u * std::sin(e.angle) + v * std::cos(e.angle);
      if (disk_inside(d, e, height, width)) {
        spec.lesions.push_back(d);
        break;
      }
    }
  }
  return spec;
}

PhantomPair generate(const PhantomSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed, 0x757074);
  PhantomPair out;
  for (std::size_t b = 0; b < spec.bones.size(); ++b)
    out.bone_levels.push_back(spec.background * rng.uniform(spec.bone_ratio_lo, spec.bone_ratio_hi));
  for (const Disk& d : spec.lesions)
    out.lesion_levels.push_back(spec.lesion_multiplier * out.bone_levels[static_cast<std::size_t>(d.bone)] *
                                rng.uniform(spec.lesion_factor_lo, spec.lesion_factor_hi));

  PlaneArray<double> pixels = PlaneArray<double>::Constant(spec.height, spec.width, spec.background);
  LabelArray labels = LabelArray::Constant(spec.height, spec.width, kBackground);
  for (Index r = 0; r < spec.height; ++r)
    for (Index c = 0; c < spec.width; ++c) {
      const auto y = static_cast<double>(r), x = static_cast<double>(c);
      for (std::size_t b = 0; b < spec.bones.size(); ++b)
        if (spec.bones[b].contains(y, x)) {
          pixels(r, c) = out.bone_levels[b];
          labels(r, c) = kBone;
        }
      for (std::size_t i = 0; i < spec.lesions.size(); ++i)
        if (spec.lesions[i].contains(y, x)) {
          pixels(r, c) = out.lesion_levels[i];
          labels(r, c) = kLesion;
        }
    }
  out.image = ScalarImage<double>(std::move(pixels), spec.spacing);
  out.truth = LabelMap(std::move(labels), 3);
  return out;
}

ScalarImage<double> add_gaussian(const ScalarImage<double>& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw usage_error("sigma must be >= 0");
  if (sigma == 0.0) return img;
  CounterRng rng(seed, 0x67617573);
  PlaneArray<double> out = img.pixels();
  for (Index j = 0; j < out.size(); ++j) out.data()[j] += sigma * rng.normal();
  return ScalarImage<double>(std::move(out), img.spacing());
}

ScalarImage<double> add_poisson(const ScalarImage<double>& img, double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) throw usage_error("poisson scale must be positive");
  if (img.size() > 0 && img.pixels().minCoeff() < 0.0) throw usage_error("poisson noise needs non-negative values");
  CounterRng rng(seed, 0x706F6973);
  PlaneArray<double> out(img.height(), img.width());
  for (Index j = 0; j < out.size(); ++j)
    out.data()[j] = static_cast<double>(rng.poisson(scale * img[j])) / scale;
  return ScalarImage<double>(std::move(out), img.spacing());
}

}  // namespace fuzzyseg
