#include "fuzzyseg/metrics.hpp"

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace testing;

namespace {

BinaryMask mask(Index h, Index w, std::initializer_list<int> bits, Spacing spacing = {}) {
  REQUIRE(static_cast<Index>(bits.size()) == h * w);
  MaskArray a(h, w);
  Index j = 0;
  for (int b : bits) a.data()[j++] = b != 0;
  return BinaryMask(a, spacing);
}

BinaryMask random_mask(Index h, Index w, std::uint64_t seed, double p = 0.35, Spacing spacing = {}) {
  CounterRng rng(seed, 21);
  MaskArray a(h, w);
  for (Index j = 0; j < a.size(); ++j) a.data()[j] = rng.uniform() < p;
  return BinaryMask(a, spacing);
}

/// Blob-like mask: a random rectangle plus a few random pixels.
BinaryMask random_shape(Index h, Index w, std::uint64_t seed) {
  CounterRng rng(seed, 22);
  MaskArray a = MaskArray::Constant(h, w, false);
  const Index r0 = rng.next_u64() % (h - 2), c0 = rng.next_u64() % (w - 2);
  const Index rh = 1 + rng.next_u64() % (h - r0 - 1), cw = 1 + rng.next_u64() % (w - c0 - 1);
  a.block(r0, c0, rh, cw) = true;
  for (int i = 0; i < 4; ++i) a(rng.next_u64() % h, rng.next_u64() % w) = true;
  return BinaryMask(a);
}

double pixel_distance(const Pixel& a, const Pixel& b, Spacing s) {
  const double dy = s.dy * static_cast<double>(a.row - b.row), dx = s.dx * static_cast<double>(a.col - b.col);
  return std::sqrt(dy * dy + dx * dx);
}

double brute_surface_dsc(const BinaryMask& p, const BinaryMask& g, double tau) {
  const auto sp = boundary(p), sg = boundary(g);
  if (sp.empty() && sg.empty()) return 1.0;
  auto within = [&](const std::vector<Pixel>& from, const std::vector<Pixel>& to) {
    Index n = 0;
    for (const Pixel& a : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Pixel& b : to) best = std::min(best, pixel_distance(a, b, p.spacing()));
      n += best <= tau;
    }
    return n;
  };
  return static_cast<double>(within(sp, sg) + within(sg, sp)) / static_cast<double>(sp.size() + sg.size());
}

}  // namespace

TEST_CASE("confusion counts") {
  const auto p = mask(2, 2, {1, 1, 0, 0});
  const auto t = mask(2, 2, {1, 0, 1, 0});
  const Confusion c = confusion(p, t);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = random_mask(7, 9, seed), b = random_mask(7, 9, seed + 100);
    const Confusion x = confusion(a, b);
    CHECK(x.tp + x.fp + x.fn + x.tn == 63);
    const Confusion same = confusion(a, a);
    CHECK(same.fp == 0);
    CHECK(same.fn == 0);
    const Confusion comp = confusion(BinaryMask(!a.bits()), a);
    CHECK(comp.tp == 0);
    CHECK(comp.tn == 0);
  }
  CHECK(error_kind_of([] { confusion(BinaryMask(MaskArray::Zero(2, 3)), BinaryMask(MaskArray::Zero(3, 2))); }) ==
        ErrorKind::Usage);
}

TEST_CASE("overlap scores") {
  const auto m = mask(2, 2, {1, 1, 0, 1});
  CHECK(dsc(m, m) == 1.0);
  CHECK(iou(m, m) == 1.0);
  CHECK(recall(m, m) == 1.0);
  CHECK(precision(m, m) == 1.0);
  const auto a = mask(2, 2, {1, 0, 0, 0}), b = mask(2, 2, {0, 0, 1, 1});
  CHECK(dsc(a, b) == 0.0);
  CHECK(iou(a, b) == 0.0);
  CHECK(recall(a, b) == 0.0);
  CHECK(precision(a, b) == 0.0);
  // pred is half of truth
  const auto pred = mask(2, 2, {1, 1, 0, 0}), truth = mask(2, 2, {1, 1, 1, 1});
  CHECK(recall(pred, truth) == 0.5);
  CHECK(precision(pred, truth) == 1.0);
  CHECK(dsc(pred, truth) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(iou(pred, truth) == 0.5);
}

TEST_CASE("empty mask conventions") {
  const auto empty = mask(2, 2, {0, 0, 0, 0});
  const auto full = mask(2, 2, {1, 1, 1, 1});
  CHECK(dsc(empty, empty) == 1.0);
  CHECK(iou(empty, empty) == 1.0);
  CHECK(recall(empty, empty) == 1.0);
  CHECK(precision(empty, empty) == 1.0);
  CHECK(surface_dsc(empty, empty, 1.0) == 1.0);
  CHECK(dsc(empty, full) == 0.0);
  CHECK(dsc(full, empty) == 0.0);
  CHECK(recall(empty, full) == 0.0);
  CHECK(precision(full, empty) == 0.0);
  CHECK(surface_dsc(empty, full, 5.0) == 0.0);
}

TEST_CASE("iou follows from dsc") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto a = random_mask(10, 10, seed), b = random_mask(10, 10, seed + 1000);
    const double d = dsc(a, b);
    CHECK(std::abs(iou(a, b) - d / (2 - d)) < 1e-12);
  }
}

TEST_CASE("boundary") {
  CHECK(boundary(mask(3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0})) == std::vector<Pixel>{{1, 1}});
  CHECK(boundary(mask(2, 2, {0, 0, 0, 0})).empty());
  MaskArray square = MaskArray::Constant(6, 6, false);
  square.block(1, 1, 4, 4) = true;
  const auto s = boundary(BinaryMask(square));
  CHECK(s.size() == 12);
  for (const Pixel& p : s) CHECK((p.row == 1 || p.row == 4 || p.col == 1 || p.col == 4));
  // Touching the image edge counts as a boundary.
  CHECK(boundary(BinaryMask(MaskArray::Constant(3, 3, true))).size() == 8);
}

TEST_CASE("distance field") {
  const auto single = distance_field({{0, 0}}, 1, 5);
  CHECK(single(0, 4) == 4.0);
  CHECK(single(0, 0) == 0.0);
  const auto none = distance_field({}, 2, 2);
  CHECK(std::isinf(none(1, 1)));
  for (Spacing spacing : {Spacing{}, Spacing{2.0, 0.5}})
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::vector<Pixel> pts;
      CounterRng rng(seed, 5);
      const int n = 1 + static_cast<int>(rng.next_u64() % 10);
      for (int i = 0; i < n; ++i) pts.push_back({static_cast<Index>(rng.next_u64() % 12), static_cast<Index>(rng.next_u64() % 12)});
      const auto field = distance_field(pts, 12, 12, spacing);
      bool exact = true;
      for (Index r = 0; r < 12; ++r)
        for (Index c = 0; c < 12; ++c) {
          double best = std::numeric_limits<double>::infinity();
          for (const Pixel& p : pts) best = std::min(best, pixel_distance({r, c}, p, spacing));
          exact = exact && field(r, c) == best;
        }
      CHECK(exact);
    }
}

TEST_CASE("surface dsc against brute force") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto a = seed % 2 ? random_mask(12, 12, seed) : random_shape(12, 12, seed);
    const auto b = seed % 2 ? random_mask(12, 12, seed + 500) : random_shape(12, 12, seed + 500);
    double last = -1;
    for (double tau : {0.0, 1.0, 2.0}) {
      const double s = surface_dsc(a, b, tau);
      CHECK(s == brute_surface_dsc(a, b, tau));
      CHECK(s == surface_dsc(b, a, tau));
      CHECK(s >= last);
      CHECK(surface_dsc(a, a, tau) == 1.0);
      last = s;
    }
    if (a.count() > 0 && b.count() > 0) CHECK(surface_dsc(a, b, 1e6) == 1.0);
  }
}

TEST_CASE("shifted square") {
  MaskArray a = MaskArray::Constant(6, 6, false), b = a;
  a.block(1, 1, 3, 3) = true;
  b.block(1, 2, 3, 3) = true;
  const BinaryMask p(a), g(b);
  // Each boundary has 8 pixels, 4 of which coincide with the other boundary.
  CHECK(surface_dsc(p, g, 1.0) == 1.0);
  CHECK(surface_dsc(p, g, 0.0) == brute_surface_dsc(p, g, 0.0));
  CHECK(surface_dsc(p, g, 0.0) == 0.5);
}

TEST_CASE("weighted average") {
  CHECK(weighted_average({0.5, 0.9}, {10, 30}) == 0.8);
  CHECK(weighted_average({0.2, 0.4, 0.9}, {5, 5, 5}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(weighted_average({0.7}, {3}) == 0.7);
  CHECK(error_kind_of([] { weighted_average({0.5, 0.5}, {0, 0}); }) == ErrorKind::Usage);
  CHECK(error_kind_of([] { weighted_average({0.5}, {1, 2}); }) == ErrorKind::Usage);
}

TEST_CASE("class reports and aggregation") {
  const auto truth = labels(2, 4, 3, {0, 1, 1, 2, 0, 1, 1, 0});
  const auto pred = labels(2, 4, 3, {0, 1, 0, 2, 0, 1, 1, 2});
  const auto classes = default_class_specs();
  REQUIRE(classes.size() == 2);
  CHECK(classes[0].tau == 2.0);
  CHECK(classes[1].tau == 1.0);
  const MetricReport r = evaluate(pred, truth, classes);
  CHECK(r.per_class[0].dsc == doctest::Approx(2.0 * 3 / (3 + 4)));
  CHECK(r.per_class[0].volume == 4.0);
  CHECK(r.per_class[1].recall == 1.0);
  CHECK(r.per_class[1].precision == 0.5);
  const MetricReport other = evaluate(truth, truth, classes);
  const MetricReport agg = aggregate({r, other});
  CHECK(agg.per_class[0].dsc == doctest::Approx(0.5 * r.per_class[0].dsc + 0.5));
  CHECK(agg.per_class[1].surface_dsc == doctest::Approx(0.5 * (r.per_class[1].surface_dsc + 1.0)));
  for (const ClassScores& s : r.per_class)
    for (double v : {s.dsc, s.recall, s.precision, s.iou, s.surface_dsc}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("isolated pixels") {
  CHECK(isolated_pixels(labels(3, 3, 2, {0, 0, 0, 0, 1, 0, 0, 0, 0})) == 1);
  CHECK(isolated_pixels(labels(3, 3, 2, {0, 0, 0, 0, 1, 1, 0, 0, 0})) == 0);
  CHECK(isolated_pixels(labels(2, 2, 2, {1, 0, 0, 1})) == 4);
  CHECK(isolated_pixels(labels(1, 3, 2, {0, 0, 0})) == 0);
}
