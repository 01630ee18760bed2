#ifndef FUZZYSEG_TRAINER_HPP
#define FUZZYSEG_TRAINER_HPP

#include "fuzzyseg/losses.hpp"
#include "fuzzyseg/net.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fuzzyseg {

enum class Regime { Unsupervised, Supervised, Semi };
enum class Normalization { ZScore, Unit };

struct Sample {
  ScalarImage<double> image;
  std::optional<LabelMap> truth;
  std::string name;
};

using Dataset = std::vector<Sample>;

struct RunConfig {
  Regime regime = Regime::Unsupervised;
  LossKind loss = LossKind::Rfcm;
  LossConfig loss_config;
  ModelSpec model;
  OptimizerConfig optimizer;
  Normalization normalization = Normalization::ZScore;
  std::vector<double> gammas;  ///< augmentation gammas; empty disables augmentation
  int eval_every = 10;         ///< held-out loss cadence in steps (0 disables)
  std::vector<int> validation;  ///< dataset indices held out of training
  std::uint64_t seed = 0;

  /// Checks that the loss belongs to the regime.
  void validate() const;
};

struct LogEntry {
  int step = 0;
  double loss = 0;
  double unsupervised = 0;
  double supervised = 0;
  double validation_loss = -1;  ///< negative when not evaluated at this step
  double seconds = 0;
};

struct TrainResult {
  ModelSpec model;
  ParamSet<double> params;
  std::vector<LogEntry> log;
};

/// Unit-normalizes every image and appends one gamma-corrected copy per gamma.
/// Labels are copied unchanged.
Dataset augment(const Dataset& dataset, const std::vector<double>& gammas);

/// Final intensity normalization applied to every image the model sees.
ScalarImage<double> preprocess(const ScalarImage<double>& img, Normalization mode);

/// Full-batch training: each step sums the loss over the (augmented,
/// normalized) training images, backpropagates, and takes one optimizer step.
/// Throws a numerical error if the loss becomes non-finite.
TrainResult train(const Dataset& dataset, const RunConfig& cfg);

/// softmax(forward(params, img)) on an already-preprocessed image.
MembershipField<double> infer(const ParamSet<double>& params, const ModelSpec& model, const ScalarImage<double>& img);

/// Permutation p such that class p[0] has the lowest q-weighted mean intensity, p[1] the next, ...
std::vector<int> class_order(const ScalarImage<double>& img, const MembershipField<double>& f, double q);

/// Reorders channels so that output channel i is input channel order[i].
MembershipField<double> permute_classes(const MembershipField<double>& f, const std::vector<int>& order);

std::string regime_name(Regime r);
Regime parse_regime(const std::string& name);
std::string normalization_name(Normalization n);
Normalization parse_normalization(const std::string& name);

}  // namespace fuzzyseg

#endif  // FUZZYSEG_TRAINER_HPP
