#ifndef FUZZYSEG_GRADCHECK_HPP
#define FUZZYSEG_GRADCHECK_HPP

#include "fuzzyseg/config.hpp"

#include <string>
#include <vector>

namespace fuzzyseg {

struct GradcheckResult {
  LossKind loss = LossKind::Rfcm;
  ModelKind model = ModelKind::ConvStack;
  MeansMode means_mode = MeansMode::Detached;
  int instances = 0;
  int resampled = 0;  ///< directions redrawn because they crossed a kink
  double max_rel_error = 0;
  bool passed = false;
};

struct GradcheckReport {
  double tolerance = 0;
  std::vector<GradcheckResult> results;
  bool passed = false;
};

/// Loss weights used by the check; every term is switched on so each part of
/// every gradient is exercised.
LossConfig gradcheck_loss_config(double q, MeansMode mode);

/// Compares the analytic directional derivative g.d against the central
/// difference (L(t + h d) - L(t - h d)) / 2h for every loss, model kind and
/// means mode. Directions whose ReLU or total-variation sign pattern changes
/// inside [t - h d, t + h d] are redrawn.
GradcheckReport run_gradcheck(const GradcheckOptions& opts, std::uint64_t seed);

std::string model_kind_name(ModelKind kind);
std::string means_mode_name(MeansMode mode);

}  // namespace fuzzyseg

#endif  // FUZZYSEG_GRADCHECK_HPP
