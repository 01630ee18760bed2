#include "fuzzyseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fuzzyseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw usage_error("mask shapes differ");
}

double ratio_or_convention(std::int64_t num, std::int64_t den, bool both_empty) {
  if (den == 0) return both_empty ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

bool both_empty(const Confusion& c) { return c.tp == 0 && c.fp == 0 && c.fn == 0; }

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) over one line:
// out[p] = min_q f[q] + (step * (p - q))^2. Infinite entries are skipped.
void envelope_1d(const std::vector<double>& f, double step, std::vector<double>& out, std::vector<Index>& site,
                 std::vector<double>& bound) {
  const auto n = static_cast<Index>(f.size());
  const double s2 = step * step;
  Index k = -1;
  for (Index q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double fq = f[q] + s2 * static_cast<double>(q * q);
    for (;;) {
      if (k < 0) {
        ++k;
        site[k] = q;
        bound[k] = -kInf;
        break;
      }
      const Index v = site[k];
      const double fv = f[v] + s2 * static_cast<double>(v * v);
      const double x = (fq - fv) / (2.0 * s2 * static_cast<double>(q - v));
      if (x <= bound[k]) {
        --k;
        continue;
      }
      ++k;
      site[k] = q;
      bound[k] = x;
      break;
    }
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  Index j = 0;
  for (Index p = 0; p < n; ++p) {
    while (j < k && bound[j + 1] < static_cast<double>(p)) ++j;
    const double d = step * static_cast<double>(p - site[j]);
    out[p] = d * d + f[site[j]];
  }
}

}  // namespace

BinaryMask::BinaryMask(MaskArray bits, Spacing spacing) : bits_(std::move(bits)), spacing_(spacing) {
  if (!(spacing_.dy > 0.0) || !(spacing_.dx > 0.0)) throw usage_error("spacing must be positive");
}

BinaryMask mask_of(const LabelMap& labels, int label, Spacing spacing) {
  return BinaryMask(labels.labels() == label, spacing);
}

Confusion confusion(const BinaryMask& pred, const BinaryMask& truth) {
  require_same_shape(pred, truth);
  Confusion c;
  const auto& p = pred.bits();
  const auto& t = truth.bits();
  for (Index j = 0; j < p.size(); ++j) {
    const bool a = p.data()[j], b = t.data()[j];
    if (a && b)
      ++c.tp;
    else if (a)
      ++c.fp;
    else if (b)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double dsc(const Confusion& c) { return ratio_or_convention(2 * c.tp, 2 * c.tp + c.fp + c.fn, both_empty(c)); }
double iou(const Confusion& c) { return ratio_or_convention(c.tp, c.tp + c.fp + c.fn, both_empty(c)); }
double recall(const Confusion& c) { return ratio_or_convention(c.tp, c.tp + c.fn, both_empty(c)); }
double precision(const Confusion& c) { return ratio_or_convention(c.tp, c.tp + c.fp, both_empty(c)); }

std::vector<Pixel> boundary(const BinaryMask& mask) {
  std::vector<Pixel> out;
  const Index h = mask.height(), w = mask.width();
  auto background = [&](Index r, Index c) { return r < 0 || r >= h || c < 0 || c >= w || !mask(r, c); };
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      if (mask(r, c) && (background(r - 1, c) || background(r + 1, c) || background(r, c - 1) || background(r, c + 1)))
        out.push_back({r, c});
  return out;
}

PlaneArray<double> squared_distance_field(const std::vector<Pixel>& points, Index height, Index width,
                                          Spacing spacing) {
  PlaneArray<double> d = PlaneArray<double>::Constant(height, width, kInf);
  for (const Pixel& p : points) {
    if (p.row < 0 || p.row >= height || p.col < 0 || p.col >= width) throw usage_error("point outside the grid");
    d(p.row, p.col) = 0.0;
  }
  if (points.empty()) return d;
  const Index n = std::max(height, width);
  std::vector<Index> site(static_cast<std::size_t>(n));
  std::vector<double> bound(static_cast<std::size_t>(n) + 1);

  std::vector<double> line(static_cast<std::size_t>(height)), out(static_cast<std::size_t>(height));
  for (Index c = 0; c < width; ++c) {
    for (Index r = 0; r < height; ++r) line[static_cast<std::size_t>(r)] = d(r, c);
    envelope_1d(line, spacing.dy, out, site, bound);
    for (Index r = 0; r < height; ++r) d(r, c) = out[static_cast<std::size_t>(r)];
  }
  line.resize(static_cast<std::size_t>(width));
  out.resize(static_cast<std::size_t>(width));
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) line[static_cast<std::size_t>(c)] = d(r, c);
    envelope_1d(line, spacing.dx, out, site, bound);
    for (Index c = 0; c < width; ++c) d(r, c) = out[static_cast<std::size_t>(c)];
  }
  return d;
}

PlaneArray<double> distance_field(const std::vector<Pixel>& points, Index height, Index width, Spacing spacing) {
  return squared_distance_field(points, height, width, spacing).unaryExpr([](double v) { return std::sqrt(v); });
}

double surface_dsc(const BinaryMask& pred, const BinaryMask& truth, double tau) {
  require_same_shape(pred, truth);
  if (!(tau >= 0.0)) throw usage_error("tolerance must be >= 0");
  const std::vector<Pixel> sp = boundary(pred);
  const std::vector<Pixel> sg = boundary(truth);
  if (sp.empty() && sg.empty()) return 1.0;
  const Spacing spacing = truth.spacing();
  const PlaneArray<double> dp = distance_field(sp, pred.height(), pred.width(), spacing);
  const PlaneArray<double> dg = distance_field(sg, truth.height(), truth.width(), spacing);
  std::int64_t within = 0;
  for (const Pixel& p : sp) within += dg(p.row, p.col) <= tau;
  for (const Pixel& g : sg) within += dp(g.row, g.col) <= tau;
  return static_cast<double>(within) / static_cast<double>(sp.size() + sg.size());
}

double weighted_average(const std::vector<double>& scores, const std::vector<double>& volumes) {
  if (scores.empty() || scores.size() != volumes.size()) throw usage_error("scores and volumes must align");
  double total = 0.0;
  for (double v : volumes) {
    if (!(v >= 0.0)) throw usage_error("volumes must be >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw usage_error("volumes are all zero");
  double out = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) out += volumes[i] / total * scores[i];
  return out;
}

std::vector<ClassSpec> default_class_specs(Spacing spacing) {
  const double voxel = std::max(spacing.dy, spacing.dx);
  return {{1, "bone", 2.0 * voxel}, {2, "lesion", 1.0 * voxel}};
}

MetricReport evaluate(const LabelMap& pred, const LabelMap& truth, const std::vector<ClassSpec>& classes,
                      Spacing spacing) {
  if (pred.height() != truth.height() || pred.width() != truth.width())
    throw usage_error("prediction and truth shapes differ");
  MetricReport report;
  for (const ClassSpec& spec : classes) {
    const BinaryMask p = mask_of(pred, spec.label, spacing);
    const BinaryMask t = mask_of(truth, spec.label, spacing);
    const Confusion c = confusion(p, t);
    ClassScores s;
    s.spec = spec;
    s.dsc = dsc(c);
    s.recall = recall(c);
    s.precision = precision(c);
    s.iou = iou(c);
    s.surface_dsc = surface_dsc(p, t, spec.tau);
    s.volume = static_cast<double>(c.tp + c.fn) * spacing.dy * spacing.dx;
    report.per_class.push_back(s);
  }
  return report;
}

MetricReport aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw usage_error("nothing to aggregate");
  MetricReport out;
  const std::size_t classes = reports.front().per_class.size();
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<double> vol, d, r, p, i;
    double surface = 0.0;
    for (const MetricReport& rep : reports) {
      if (rep.per_class.size() != classes) throw usage_error("reports disagree on class list");
      const ClassScores& s = rep.per_class[k];
      vol.push_back(s.volume);
      d.push_back(s.dsc);
      r.push_back(s.recall);
      p.push_back(s.precision);
      i.push_back(s.iou);
      surface += s.surface_dsc;
    }
    const double total = std::accumulate(vol.begin(), vol.end(), 0.0);
    if (!(total > 0.0)) std::fill(vol.begin(), vol.end(), 1.0);
    ClassScores agg;
    agg.spec = reports.front().per_class[k].spec;
    agg.dsc = weighted_average(d, vol);
    agg.recall = weighted_average(r, vol);
    agg.precision = weighted_average(p, vol);
    agg.iou = weighted_average(i, vol);
    agg.surface_dsc = surface / static_cast<double>(reports.size());
    agg.volume = total;
    out.per_class.push_back(agg);
  }
  return out;
}

Index isolated_pixels(const LabelMap& labels) {
  const Index h = labels.height(), w = labels.width();
  Index count = 0;
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      const int own = labels(r, c);
      int neighbors = 0, agree = 0;
      auto visit = [&](Index rr, Index cc) {
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) return;
        ++neighbors;
        agree += labels(rr, cc) == own;
      };
      visit(r - 1, c);
      visit(r + 1, c);
      visit(r, c - 1);
      visit(r, c + 1);
      count += neighbors > 0 && agree == 0;
    }
  return count;
}

}  // namespace fuzzyseg
