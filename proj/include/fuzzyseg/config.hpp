#ifndef FUZZYSEG_CONFIG_HPP
#define FUZZYSEG_CONFIG_HPP

#include "fuzzyseg/clustering.hpp"
#include "fuzzyseg/metrics.hpp"
#include "fuzzyseg/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>

namespace fuzzyseg {

enum class ClusterMethod { Fcm, Rfcm };

struct PhantomOptions {
  Index height = 128;
  Index width = 128;
  int bones = 1;
  int lesions = 2;
  int count = 1;
  double gaussian_sigma = 0.0;  ///< applied after unit normalization when > 0
  double poisson_scale = 0.0;   ///< applied to raw intensities when > 0
};

struct BenchOptions {
  int repetitions = 5;
};

struct GradcheckOptions {
  int instances = 20;
  Index height = 8;
  Index width = 8;
  int classes = 3;
  double step = 1e-5;
  double tolerance = 1e-5;
  bool corrupt = false;  ///< perturbs analytic gradients; a negative control
};

/// Everything a CLI run reads from its JSON document. One top-level seed
/// feeds every seeded component.
struct AppConfig {
  std::uint64_t seed = 0;
  ClusterMethod cluster_method = ClusterMethod::Rfcm;
  FcmConfig clustering;
  RunConfig run;
  std::vector<ClassSpec> metric_classes = default_class_specs();
  PhantomOptions phantom;
  BenchOptions bench;
  GradcheckOptions gradcheck;

  void apply_seed(std::uint64_t s);
};

/// Parses and validates a config document. Unknown keys are rejected.
AppConfig parse_config(const nlohmann::json& doc);
AppConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const AppConfig& cfg);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_from_json(const nlohmann::json& doc);

}  // namespace fuzzyseg

#endif  // FUZZYSEG_CONFIG_HPP
