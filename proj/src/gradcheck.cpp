#include "fuzzyseg/gradcheck.hpp"

#include "fuzzyseg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace fuzzyseg {

namespace {

constexpr double kQs[] = {1.0, 1.5, 2.0, 3.0};
constexpr double kKinkMargin = 1e-4;
constexpr int kDirections = 20;
constexpr int kRedraws = 50;

struct Instance {
  ScalarImage<double> image;
  GroundTruth<double> truth;
  ModelSpec model;
  ParamSet<double> params;
  LossConfig loss;
};

Instance make_instance(const GradcheckOptions& opts, ModelKind kind, MeansMode mode, std::uint64_t seed, int index) {
  CounterRng rng(seed, 0x67636B00 + static_cast<std::uint64_t>(index));
  PlaneArray<double> pixels(opts.height, opts.width);
  for (Index j = 0; j < pixels.size(); ++j) pixels.data()[j] = rng.uniform();
  LabelArray labels(opts.height, opts.width);
  for (Index j = 0; j < labels.size(); ++j)
    labels.data()[j] = static_cast<int>(rng.uniform() * opts.classes) % opts.classes;

  ModelSpec spec;
  spec.kind = kind;
  spec.layers = 2;
  spec.channels = 4;
  spec.classes = opts.classes;
  spec.height = opts.height;
  spec.width = opts.width;
  spec.seed = rng.next_u64();
  ParamSet<double> params = init_params<double>(spec);
  // Nonzero biases and larger logits so no term sits at a trivial point.
  for (Index i = 0; i < params.size(); ++i) params.values(i) += rng.uniform(-0.1, 0.1);
  if (kind == ModelKind::LogitField) params.values *= 4.0;

  const double q = kQs[static_cast<std::size_t>(index) % std::size(kQs)];
  return {ScalarImage<double>(std::move(pixels)), one_hot<double>(LabelMap(std::move(labels), opts.classes), opts.classes),
          spec, std::move(params), gradcheck_loss_config(q, mode)};
}

/// Everything whose sign flip would make the loss non-smooth along a direction.
/// Empty optional when a smoothed absolute value sits too close to its kink.
std::optional<std::vector<bool>> kink_pattern(const Instance& in, const ParamSet<double>& params, LossKind loss) {
  const auto fwd = forward(in.model, params, in.image);
  std::vector<bool> out;
  for (const auto& layer : fwd.cache.active_pattern()) out.insert(out.end(), layer.begin(), layer.end());
  if (loss == LossKind::Ms || loss == LossKind::SemiMs) {
    const MembershipField<double> z = softmax(fwd.logits);
    const Index h = in.image.height(), w = in.image.width();
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < w; ++c)
        for (Index k = 0; k < z.classes(); ++k) {
          const Index j = r * w + c;
          for (Index nb : {c + 1 < w ? j + 1 : Index(-1), r + 1 < h ? j + w : Index(-1)}) {
            if (nb < 0) continue;
            const double d = z.values()(nb, k) - z.values()(j, k);
            if (d != 0.0 && std::abs(d) < kKinkMargin) return std::nullopt;
            out.push_back(d > 0.0);
          }
        }
  }
  return out;
}

double loss_value(const Instance& in, const ParamSet<double>& params, LossKind loss) {
  const auto fwd = forward(in.model, params, in.image);
  return evaluate_loss(loss, in.image, fwd.logits, &in.truth, in.loss).value;
}

}  // namespace

LossConfig gradcheck_loss_config(double q, MeansMode mode) {
  LossConfig cfg;
  cfg.q = q;
  cfg.beta = 0.05;
  cfg.alpha = 0.5;
  cfg.lambda = 0.1;
  cfg.means_mode = mode;
  return cfg;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opts, std::uint64_t seed) {
  GradcheckReport report;
  report.tolerance = opts.tolerance;
  report.passed = true;
  int case_index = 0;
  for (LossKind loss : kAllLosses)
    for (ModelKind kind : {ModelKind::LogitField, ModelKind::ConvStack})
      for (MeansMode mode : {MeansMode::Detached, MeansMode::Differentiated}) {
        GradcheckResult res{loss, kind, mode};
        for (int i = 0; i < opts.instances; ++i) {
          bool done = false;
          for (int redraw = 0; redraw < kRedraws && !done; ++redraw) {
            const int index = case_index * 100000 + redraw * 1000 + i;
            const Instance in = make_instance(opts, kind, mode, seed, index);
            const auto base = kink_pattern(in, in.params, loss);
            if (!base) continue;
            const auto fwd = forward(in.model, in.params, in.image);
            const auto lv = evaluate_loss(loss, in.image, fwd.logits, &in.truth, in.loss);
            Vector<double> grad = backward(in.model, in.params, fwd.cache, lv.grad_logits);
            if (opts.corrupt) grad *= 1.01;

            CounterRng rng(seed ^ 0x646972, static_cast<std::uint64_t>(index));
            for (int attempt = 0; attempt < kDirections; ++attempt) {
              Vector<double> d(in.params.size());
              for (Index k = 0; k < d.size(); ++k) d(k) = rng.normal();
              d /= d.norm();
              ParamSet<double> plus = in.params, minus = in.params;
              plus.values += opts.step * d;
              minus.values -= opts.step * d;
              if (kink_pattern(in, plus, loss) != base || kink_pattern(in, minus, loss) != base) {
                ++res.resampled;
                continue;
              }
              const double numeric = (loss_value(in, plus, loss) - loss_value(in, minus, loss)) / (2.0 * opts.step);
              const double analytic = grad.dot(d);
              const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-12});
              res.max_rel_error = std::max(res.max_rel_error, std::abs(numeric - analytic) / scale);
              ++res.instances;
              done = true;
              break;
            }
          }
        }
        res.passed = res.instances == opts.instances && res.max_rel_error < opts.tolerance;
        report.passed = report.passed && res.passed;
        report.results.push_back(res);
        ++case_index;
      }
  return report;
}

std::string model_kind_name(ModelKind kind) { return kind == ModelKind::ConvStack ? "conv_stack" : "logit_field"; }

std::string means_mode_name(MeansMode mode) { return mode == MeansMode::Detached ? "detached" : "differentiated"; }

}  // namespace fuzzyseg
