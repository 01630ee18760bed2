#ifndef FUZZYSEG_PIPELINE_HPP
#define FUZZYSEG_PIPELINE_HPP

#include "fuzzyseg/config.hpp"
#include "fuzzyseg/phantom.hpp"

#include <filesystem>

namespace fuzzyseg {

/// Random phantom for `seed`, with Poisson noise on raw intensities and then
/// unit normalization plus Gaussian noise when the options ask for them.
PhantomPair noisy_phantom(const PhantomOptions& opts, std::uint64_t seed);

/// Runs FCM or RFCM and relabels classes so that class 0 has the lowest mean.
FcmState<double> cluster(const ScalarImage<double>& img, ClusterMethod method, const FcmConfig& cfg);

struct Checkpoint {
  ModelSpec model;
  ParamSet<double> params;
  Regime regime = Regime::Unsupervised;
  LossKind loss = LossKind::Rfcm;
  Normalization normalization = Normalization::ZScore;
  double q = 2.0;
  std::uint64_t seed = 0;
};

/// Writes parameters as FD1 (1 x N x 1) at `path` and metadata as JSON at `path` + ".json".
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Preprocesses, infers and, for unsupervised checkpoints, orders classes by intensity.
MembershipField<double> segment(const Checkpoint& ckpt, const ScalarImage<double>& raw);

struct BenchReport {
  double convnet_s = 0;
  double rfcm_s = 0;
  double ratio = 0;
  int repetitions = 0;
  int rfcm_iterations = 0;
};

/// Median wall-clock of infer() and of run_rfcm() to convergence on the same image.
BenchReport bench(const ScalarImage<double>& img, const ModelSpec& model, const ParamSet<double>& params,
                  const FcmConfig& fcm, int repetitions);

}  // namespace fuzzyseg

#endif  // FUZZYSEG_PIPELINE_HPP
