#include "fuzzyseg/pipeline.hpp"

#include "fuzzyseg/heap.hpp"
#include "fuzzyseg/io.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

namespace fuzzyseg {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

PhantomPair noisy_phantom(const PhantomOptions& opts, std::uint64_t seed) {
  PhantomPair pair = generate(random_spec(opts.height, opts.width, seed, opts.bones, opts.lesions));
  if (opts.poisson_scale > 0.0) pair.image = add_poisson(pair.image, opts.poisson_scale, seed);
  if (opts.gaussian_sigma > 0.0) pair.image = add_gaussian(normalize_unit(pair.image), opts.gaussian_sigma, seed);
  return pair;
}

FcmState<double> cluster(const ScalarImage<double>& img, ClusterMethod method, const FcmConfig& cfg) {
  FcmState<double> state = method == ClusterMethod::Fcm ? run_fcm(img, cfg) : run_rfcm(img, cfg);
  std::vector<int> order(static_cast<std::size_t>(cfg.classes));
  for (int k = 0; k < cfg.classes; ++k) order[static_cast<std::size_t>(k)] = k;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return state.means(a) < state.means(b); });
  state.memberships = permute_classes(state.memberships, order);
  ClassMeans<double> means(cfg.classes);
  for (int k = 0; k < cfg.classes; ++k) means(k) = state.means(order[static_cast<std::size_t>(k)]);
  state.means = means;
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  RawField64 raw{1, ckpt.params.size(), 1, std::vector<double>(ckpt.params.values.begin(), ckpt.params.values.end())};
  write_field64(path, raw);
  nlohmann::json shapes = nlohmann::json::array();
  for (const TensorShape& t : ckpt.params.shapes)
    shapes.push_back({{"name", t.name}, {"dims", t.dims}, {"offset", t.offset}, {"size", t.size}});
  const nlohmann::json meta = {{"model", to_json(ckpt.model)},
                               {"shapes", shapes},
                               {"regime", regime_name(ckpt.regime)},
                               {"loss", std::string(loss_name(ckpt.loss))},
                               {"normalization", normalization_name(ckpt.normalization)},
                               {"q", ckpt.q},
                               {"seed", ckpt.seed}};
  std::ofstream out(path.string() + ".json");
  if (!out) throw io_error("cannot write " + path.string() + ".json");
  out << meta.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw io_error("missing checkpoint metadata " + path.string() + ".json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad checkpoint metadata: " + std::string(e.what()));
  }
  Checkpoint ckpt;
  try {
    ckpt.model = model_from_json(meta.at("model"));
    ckpt.regime = parse_regime(meta.at("regime").get<std::string>());
    ckpt.loss = parse_loss_kind(meta.at("loss").get<std::string>());
    ckpt.normalization = parse_normalization(meta.at("normalization").get<std::string>());
    ckpt.q = meta.at("q").get<double>();
    ckpt.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad checkpoint metadata: " + std::string(e.what()));
  }
  ckpt.model.seed = ckpt.seed;
  const RawField64 raw = read_field64(path);
  ckpt.params.shapes = parameter_shapes(ckpt.model);
  if (meta.contains("shapes")) {
    const auto& listed = meta.at("shapes");
    bool same = listed.is_array() && listed.size() == ckpt.params.shapes.size();
    for (std::size_t i = 0; same && i < listed.size(); ++i) {
      const TensorShape& t = ckpt.params.shapes[i];
      same = listed[i].value("name", "") == t.name && listed[i].value("size", Index(-1)) == t.size &&
             listed[i].value("offset", Index(-1)) == t.offset;
    }
    if (!same) throw io_error("checkpoint shape table does not match its model");
  }
  if (static_cast<Index>(raw.values.size()) != ckpt.model.parameter_count())
    throw io_error("checkpoint size does not match its model");
  ckpt.params.values = Eigen::Map<const Vector<double>>(raw.values.data(), static_cast<Index>(raw.values.size()));
  return ckpt;
}

MembershipField<double> segment(const Checkpoint& ckpt, const ScalarImage<double>& raw) {
  const ScalarImage<double> img = preprocess(raw, ckpt.normalization);
  MembershipField<double> f = infer(ckpt.params, ckpt.model, img);
  if (ckpt.regime == Regime::Unsupervised) f = permute_classes(f, class_order(img, f, ckpt.q));
  return f;
}

BenchReport bench(const ScalarImage<double>& img, const ModelSpec& model, const ParamSet<double>& params,
                  const FcmConfig& fcm, int repetitions) {
  if (repetitions < 1) throw usage_error("bench needs at least one repetition");
  retain_freed_memory();
  using clock = std::chrono::steady_clock;
  std::vector<double> net_times, rfcm_times;
  BenchReport report;
  report.repetitions = repetitions;
  for (int r = 0; r < repetitions; ++r) {
    auto t0 = clock::now();
    const MembershipField<double> f = infer(params, model, img);
    auto t1 = clock::now();
    const FcmState<double> state = run_rfcm(img, fcm);
    auto t2 = clock::now();
    net_times.push_back(std::chrono::duration<double>(t1 - t0).count());
    rfcm_times.push_back(std::chrono::duration<double>(t2 - t1).count());
    report.rfcm_iterations = state.iter;
    if (f.pixels() != state.memberships.pixels()) throw numerical_error("bench outputs disagree in size");
  }
  report.convnet_s = median(net_times);
  report.rfcm_s = median(rfcm_times);
  report.ratio = report.rfcm_s / std::max(report.convnet_s, 1e-12);
  return report;
}

}  // namespace fuzzyseg
