#include "fuzzyseg/trainer.hpp"

#include "fuzzyseg/heap.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

namespace fuzzyseg {

namespace {

bool loss_fits_regime(LossKind loss, Regime regime) {
  switch (regime) {
    case Regime::Unsupervised: return loss == LossKind::Rfcm || loss == LossKind::Ms;
    case Regime::Supervised: return loss == LossKind::FcmLabel || loss == LossKind::Dice || loss == LossKind::Ce;
    case Regime::Semi: return loss == LossKind::SemiRfcm || loss == LossKind::SemiMs;
  }
  return false;
}

struct Prepared {
  ScalarImage<double> image;
  std::optional<GroundTruth<double>> truth;
};

double evaluate_set(const std::vector<Prepared>& set, const RunConfig& cfg, const ModelSpec& model,
                    const ParamSet<double>& params) {
  double total = 0.0;
  for (const Prepared& s : set) {
    const auto fwd = forward(model, params, s.image);
    total += evaluate_loss(cfg.loss, s.image, fwd.logits, s.truth ? &*s.truth : nullptr, cfg.loss_config).value;
  }
  return total;
}

}  // namespace

void RunConfig::validate() const {
  if (!loss_fits_regime(loss, regime))
    throw usage_error("loss '" + std::string(loss_name(loss)) + "' does not belong to regime '" +
                      regime_name(regime) + "'");
  loss_config.validate();
  optimizer.validate();
  for (double g : gammas)
    if (!(g > 0.0)) throw usage_error("augmentation gammas must be positive");
  if (eval_every < 0) throw usage_error("eval_every must be >= 0");
}

Dataset augment(const Dataset& dataset, const std::vector<double>& gammas) {
  Dataset out;
  out.reserve(dataset.size() * (gammas.size() + 1));
  for (const Sample& s : dataset) {
    const ScalarImage<double> unit = normalize_unit(s.image);
    out.push_back({unit, s.truth, s.name});
    for (double g : gammas) out.push_back({gamma_correct(unit, g), s.truth, s.name + "@gamma" + std::to_string(g)});
  }
  return out;
}

ScalarImage<double> preprocess(const ScalarImage<double>& img, Normalization mode) {
  return mode == Normalization::ZScore ? normalize_zscore(img) : normalize_unit(img);
}

TrainResult train(const Dataset& dataset, const RunConfig& cfg) {
  cfg.validate();
  retain_freed_memory();

  if (dataset.empty()) throw usage_error("training dataset is empty");
  const std::set<int> held(cfg.validation.begin(), cfg.validation.end());
  for (int i : held)
    if (i < 0 || i >= static_cast<int>(dataset.size())) throw usage_error("validation index out of range");

  Dataset training, validation;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Sample& s = dataset[i];
    if (needs_truth(cfg.loss) && !s.truth)
      throw usage_error("image '" + s.name + "' has no ground truth but the loss needs it");
    (held.count(static_cast<int>(i)) ? validation : training).push_back(s);
  }
  if (training.empty()) throw usage_error("every image is held out for validation");

  auto prepare = [&](const Dataset& set, bool with_augmentation) {
    std::vector<Prepared> out;
    for (const Sample& s : with_augmentation ? augment(set, cfg.gammas) : set) {
      Prepared p{preprocess(s.image, cfg.normalization), std::nullopt};
      if (s.truth) p.truth = one_hot<double>(*s.truth, cfg.model.classes);
      out.push_back(std::move(p));
    }
    return out;
  };
  const std::vector<Prepared> train_set = prepare(training, !cfg.gammas.empty());
  const std::vector<Prepared> val_set = prepare(validation, false);

  TrainResult result;
  result.model = cfg.model;
  if (result.model.kind == ModelKind::LogitField) {
    result.model.height = train_set.front().image.height();
    result.model.width = train_set.front().image.width();
    if (train_set.size() != 1)
      throw usage_error("a logit_field model is fitted to exactly one image");
  }
  result.params = init_params<double>(result.model);
  Optimizer<double> optimizer(cfg.optimizer, result.params.size());

  const auto start = std::chrono::steady_clock::now();
  for (int step = 0; step < cfg.optimizer.steps; ++step) {
    Vector<double> grad = Vector<double>::Zero(result.params.size());
    LogEntry entry;
    entry.step = step;
    for (const Prepared& s : train_set) {
      const auto fwd = forward(result.model, result.params, s.image);
      const auto loss =
          evaluate_loss(cfg.loss, s.image, fwd.logits, s.truth ? &*s.truth : nullptr, cfg.loss_config);
      entry.loss += loss.value;
      entry.unsupervised += loss.unsupervised;
      entry.supervised += loss.supervised;
      grad += backward(result.model, result.params, fwd.cache, loss.grad_logits);
    }
    if (!std::isfinite(entry.loss) || !grad.allFinite())
      throw numerical_error("training diverged at step " + std::to_string(step));
    if (!val_set.empty() && cfg.eval_every > 0 && step % cfg.eval_every == 0)
      entry.validation_loss = evaluate_set(val_set, cfg, result.model, result.params);
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(entry);
    optimizer.step(result.params.values, grad);
  }
  return result;
}

MembershipField<double> infer(const ParamSet<double>& params, const ModelSpec& model, const ScalarImage<double>& img) {
  return softmax(forward_logits(model, params, img));
}

std::vector<int> class_order(const ScalarImage<double>& img, const MembershipField<double>& f, double q) {
  const ClassMeans<double> means = means_update(img, f, q);
  std::vector<int> order(static_cast<std::size_t>(f.classes()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return means(a) < means(b); });
  return order;
}

MembershipField<double> permute_classes(const MembershipField<double>& f, const std::vector<int>& order) {
  if (order.size() != static_cast<std::size_t>(f.classes())) throw usage_error("permutation size mismatch");
  ChannelArray<double> v(f.pixels(), f.classes());
  for (Index k = 0; k < f.classes(); ++k) v.col(k) = f.values().col(order[static_cast<std::size_t>(k)]);
  return MembershipField<double>(f.height(), f.width(), std::move(v));
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::Unsupervised: return "unsupervised";
    case Regime::Supervised: return "supervised";
    case Regime::Semi: return "semi";
  }
  return "?";
}

Regime parse_regime(const std::string& name) {
  if (name == "unsupervised") return Regime::Unsupervised;
  if (name == "supervised") return Regime::Supervised;
  if (name == "semi") return Regime::Semi;
  throw usage_error("unknown regime '" + name + "'");
}

std::string normalization_name(Normalization n) { return n == Normalization::ZScore ? "zscore" : "unit"; }

Normalization parse_normalization(const std::string& name) {
  if (name == "zscore") return Normalization::ZScore;
  if (name == "unit") return Normalization::Unit;
  throw usage_error("unknown normalization '" + name + "'");
}

}  // namespace fuzzyseg
