#include "fuzzyseg/gradcheck.hpp"
#include "fuzzyseg/io.hpp"
#include "fuzzyseg/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fuzzyseg;

namespace {

struct Common {
  std::string config;
  bool json_out = false;
  std::optional<std::uint64_t> seed;
};

AppConfig load(const Common& common) {
  AppConfig cfg = common.config.empty() ? parse_config(json::object()) : load_config(common.config);
  if (const char* env = std::getenv("FUZZYSEG_SEED")) {
    try {
      std::size_t used = 0;
      const std::uint64_t s = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      cfg.apply_seed(s);
    } catch (const std::logic_error&) {
      throw usage_error("FUZZYSEG_SEED must be a non-negative integer");
    }
  }
  if (common.seed) cfg.apply_seed(*common.seed);
  return cfg;
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config, "JSON run-config");
  cmd->add_flag("--json", common.json_out, "machine-readable output on stdout");
  cmd->add_option("--seed", common.seed, "overrides the config and FUZZYSEG_SEED seed");
}

void emit(const Common& common, const json& doc, const std::string& human) {
  if (common.json_out)
    std::cout << doc.dump(2) << '\n';
  else
    std::cerr << human;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << text;
  if (!out) throw io_error("write failed for " + path.string());
}

ScalarImage<double> normalized(const ScalarImage<double>& img, const std::string& mode) {
  if (mode == "none") return img;
  if (mode == "unit") return normalize_unit(img);
  if (mode == "zscore") return normalize_zscore(img);
  throw usage_error("unknown normalization '" + mode + "'");
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

json spec_json(const PhantomSpec& spec, const PhantomPair& pair) {
  json bones = json::array(), lesions = json::array();
  for (std::size_t i = 0; i < spec.bones.size(); ++i) {
    const Ellipse& e = spec.bones[i];
    bones.push_back({{"cy", e.cy}, {"cx", e.cx}, {"semi_y", e.semi_y}, {"semi_x", e.semi_x}, {"angle", e.angle},
                     {"level", pair.bone_levels[i]}});
  }
  for (std::size_t i = 0; i < spec.lesions.size(); ++i) {
    const Disk& d = spec.lesions[i];
    lesions.push_back(
        {{"cy", d.cy}, {"cx", d.cx}, {"radius", d.radius}, {"bone", d.bone}, {"level", pair.lesion_levels[i]}});
  }
  return {{"height", spec.height}, {"width", spec.width}, {"seed", spec.seed}, {"background", spec.background},
          {"bones", bones},        {"lesions", lesions}};
}

// phantom ------------------------------------------------------------------

struct PhantomArgs {
  Common common;
  std::string out_dir = ".";
  std::string prefix = "p";
  std::optional<int> count;
};

void cmd_phantom(const PhantomArgs& a) {
  AppConfig cfg = load(a.common);
  if (a.count) cfg.phantom.count = *a.count;
  if (cfg.phantom.count < 1) throw usage_error("--count must be >= 1");
  ensure_dir(a.out_dir);
  json files = json::array();
  for (int i = 0; i < cfg.phantom.count; ++i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    const PhantomSpec spec = random_spec(cfg.phantom.height, cfg.phantom.width, seed, cfg.phantom.bones,
                                         cfg.phantom.lesions);
    const PhantomPair pair = noisy_phantom(cfg.phantom, seed);
    char stem[64];
    std::snprintf(stem, sizeof stem, "%s%03d", a.prefix.c_str(), i);
    const fs::path base = fs::path(a.out_dir) / stem;
    write_field(base.string() + ".ff1", to_raw(pair.image));
    write_labels_pgm(base.string() + ".truth.pgm", pair.truth);
    json echo = spec_json(spec, pair);
    echo["gaussian_sigma"] = cfg.phantom.gaussian_sigma;
    echo["poisson_scale"] = cfg.phantom.poisson_scale;
    write_text(base.string() + ".json", echo.dump(2) + "\n");
    files.push_back({{"image", base.string() + ".ff1"},
                     {"truth", base.string() + ".truth.pgm"},
                     {"spec", base.string() + ".json"}});
  }
  emit(a.common, {{"phantoms", files}}, "wrote " + std::to_string(files.size()) + " phantom(s) to " + a.out_dir + "\n");
}

// cluster ------------------------------------------------------------------

struct ClusterArgs {
  Common common;
  std::string input;
  std::string out_dir = ".";
  std::string normalize = "none";
  std::optional<std::string> method;
  std::optional<double> beta, q;
};

void cmd_cluster(const ClusterArgs& a) {
  AppConfig cfg = load(a.common);
  if (a.method) cfg.cluster_method = *a.method == "fcm" ? ClusterMethod::Fcm : ClusterMethod::Rfcm;
  if (a.beta) cfg.clustering.beta = *a.beta;
  if (a.q) cfg.clustering.q = *a.q;
  cfg.clustering.validate();
  const ScalarImage<double> img = normalized(read_image(a.input), a.normalize);
  const FcmState<double> state = cluster(img, cfg.cluster_method, cfg.clustering);
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  write_field(dir / "membership.ff1", to_raw(state.memberships));
  write_labels_pgm(dir / "labels.pgm", hard_classify(state.memberships));
  const json record = {{"method", cfg.cluster_method == ClusterMethod::Fcm ? "fcm" : "rfcm"},
                       {"iterations", state.iter},
                       {"converged", state.converged},
                       {"final_objective", state.objective_history.empty() ? 0.0 : state.objective_history.back()},
                       {"means", std::vector<double>(state.means.begin(), state.means.end())},
                       {"history", state.objective_history}};
  write_text(dir / "convergence.json", record.dump(2) + "\n");
  emit(a.common, record,
       "clustered in " + std::to_string(state.iter) + " iterations" + (state.converged ? "" : " (not converged)") +
           "\n");
}

// train --------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data;
  std::string checkpoint;
  std::string log;
  std::optional<int> steps;
  std::optional<std::string> loss, regime;
  std::optional<double> alpha, beta;
};

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw io_error("data directory not found: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".ff1") images.push_back(entry.path());
  std::sort(images.begin(), images.end());
  if (images.empty()) throw io_error("no .ff1 images in " + dir.string());
  Dataset out;
  for (const fs::path& p : images) {
    Sample s{read_image(p), std::nullopt, p.stem().string()};
    const fs::path truth = p.parent_path() / (p.stem().string() + ".truth.pgm");
    if (fs::exists(truth)) s.truth = read_labels_pgm(truth);
    out.push_back(std::move(s));
  }
  return out;
}

void cmd_train(const TrainArgs& a) {
  AppConfig cfg = load(a.common);
  RunConfig& run = cfg.run;
  if (a.steps) run.optimizer.steps = *a.steps;
  if (a.loss) run.loss = parse_loss_kind(*a.loss);
  if (a.regime) run.regime = parse_regime(*a.regime);
  if (a.alpha) run.loss_config.alpha = *a.alpha;
  if (a.beta) run.loss_config.beta = *a.beta;
  Dataset data = load_dataset(a.data);
  for (Sample& s : data)
    if (s.truth) s.truth = LabelMap(s.truth->labels(), run.model.classes);
  const TrainResult result = train(data, run);

  Checkpoint ckpt{result.model, result.params, run.regime, run.loss, run.normalization, run.loss_config.q, cfg.seed};
  const fs::path path(a.checkpoint);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  save_checkpoint(path, ckpt);

  std::ostringstream csv;
  csv << "step,loss,unsupervised,supervised,validation_loss,seconds\n";
  for (const LogEntry& e : result.log)
    csv << e.step << ',' << fmt(e.loss) << ',' << fmt(e.unsupervised) << ',' << fmt(e.supervised) << ','
        << (e.validation_loss < 0 ? std::string() : fmt(e.validation_loss)) << ',' << fmt(e.seconds) << '\n';
  const std::string log_path = a.log.empty() ? a.checkpoint + ".log.csv" : a.log;
  write_text(log_path, csv.str());

  const double final_loss = result.log.empty() ? 0.0 : result.log.back().loss;
  emit(a.common,
       {{"checkpoint", a.checkpoint},
        {"log", log_path},
        {"steps", result.log.size()},
        {"final_loss", final_loss},
        {"parameters", result.params.size()}},
       "trained " + std::to_string(result.log.size()) + " steps, final loss " + fmt(final_loss) + "\n");
}

// segment ------------------------------------------------------------------

struct SegmentArgs {
  Common common;
  std::string checkpoint;
  std::string input;
  std::string data;
  std::string out_dir = ".";
};

void cmd_segment(const SegmentArgs& a) {
  load(a.common);  // validates the config even though the checkpoint carries the model
  if (a.input.empty() == a.data.empty()) throw usage_error("give exactly one of --input or --data");
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::vector<fs::path> inputs;
  if (!a.input.empty()) {
    inputs.push_back(a.input);
  } else {
    if (!fs::is_directory(a.data)) throw io_error("data directory not found: " + a.data);
    for (const auto& entry : fs::directory_iterator(a.data))
      if (entry.path().extension() == ".ff1") inputs.push_back(entry.path());
    std::sort(inputs.begin(), inputs.end());
  }
  ensure_dir(a.out_dir);
  json outputs = json::array();
  for (const fs::path& in : inputs) {
    const ScalarImage<double> raw = read_image(in);
    const MembershipField<double> f = segment(ckpt, raw);
    const LabelMap labels = hard_classify(f);
    const fs::path base = fs::path(a.out_dir) / in.stem();
    write_field(base.string() + ".membership.ff1", to_raw(f));
    write_labels_pgm(base.string() + ".labels.pgm", labels);
    write_ppm(base.string() + ".overlay.ppm", render_overlay(normalize_unit(raw), labels));
    outputs.push_back({{"input", in.string()},
                       {"membership", base.string() + ".membership.ff1"},
                       {"labels", base.string() + ".labels.pgm"},
                       {"overlay", base.string() + ".overlay.ppm"}});
  }
  emit(a.common, {{"segmented", outputs}}, "segmented " + std::to_string(outputs.size()) + " image(s)\n");
}

// eval ---------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::vector<std::string> pred, truth;
  std::string out_dir;
};

json scores_json(const MetricReport& report) {
  json out = json::array();
  for (const ClassScores& s : report.per_class)
    out.push_back({{"label", s.spec.label},
                   {"name", s.spec.name},
                   {"tau", s.spec.tau},
                   {"dsc", s.dsc},
                   {"iou", s.iou},
                   {"recall", s.recall},
                   {"precision", s.precision},
                   {"surface_dsc", s.surface_dsc},
                   {"volume", s.volume}});
  return out;
}

void cmd_eval(const EvalArgs& a) {
  const AppConfig cfg = load(a.common);
  if (a.pred.size() != a.truth.size() || a.pred.empty())
    throw usage_error("--pred and --truth must be given the same number of times");
  int classes = 0;
  for (const ClassSpec& c : cfg.metric_classes) classes = std::max(classes, c.label + 1);
  std::vector<MetricReport> reports;
  json images = json::array();
  std::ostringstream csv;
  csv << "image,label,name,tau,dsc,iou,recall,precision,surface_dsc,volume\n";
  auto rows = [&](const std::string& image, const MetricReport& r) {
    for (const ClassScores& s : r.per_class)
      csv << image << ',' << s.spec.label << ',' << s.spec.name << ',' << fmt(s.spec.tau) << ',' << fmt(s.dsc) << ','
          << fmt(s.iou) << ',' << fmt(s.recall) << ',' << fmt(s.precision) << ',' << fmt(s.surface_dsc) << ','
          << fmt(s.volume) << '\n';
  };
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    const LabelMap p = read_labels_pgm(a.pred[i]);
    const LabelMap t = read_labels_pgm(a.truth[i]);
    const int c = std::max({classes, p.classes(), t.classes()});
    const MetricReport r = evaluate(LabelMap(p.labels(), c), LabelMap(t.labels(), c), cfg.metric_classes);
    reports.push_back(r);
    images.push_back({{"pred", a.pred[i]}, {"truth", a.truth[i]}, {"classes", scores_json(r)}});
    rows(fs::path(a.pred[i]).filename().string(), r);
  }
  const MetricReport total = aggregate(reports);
  rows("aggregate", total);
  const json doc = {{"images", images}, {"aggregate", scores_json(total)}};
  if (!a.out_dir.empty()) {
    ensure_dir(a.out_dir);
    write_text(fs::path(a.out_dir) / "report.json", doc.dump(2) + "\n");
    write_text(fs::path(a.out_dir) / "report.csv", csv.str());
  }
  if (a.common.json_out)
    std::cout << doc.dump(2) << '\n';
  else
    std::cerr << csv.str();
}

// gradcheck ----------------------------------------------------------------

struct GradcheckArgs {
  Common common;
  bool corrupt = false;
  std::optional<int> instances;
};

bool cmd_gradcheck(const GradcheckArgs& a) {
  AppConfig cfg = load(a.common);
  if (a.corrupt) cfg.gradcheck.corrupt = true;
  if (a.instances) cfg.gradcheck.instances = *a.instances;
  const GradcheckReport report = run_gradcheck(cfg.gradcheck, cfg.seed);
  json cases = json::array();
  std::map<std::string, double> per_loss;
  std::ostringstream human;
  for (const GradcheckResult& r : report.results) {
    const std::string name(loss_name(r.loss));
    per_loss[name] = std::max(per_loss[name], r.max_rel_error);
    cases.push_back({{"loss", name},
                     {"model", model_kind_name(r.model)},
                     {"means_mode", means_mode_name(r.means_mode)},
                     {"instances", r.instances},
                     {"resampled", r.resampled},
                     {"max_rel_error", r.max_rel_error},
                     {"passed", r.passed}});
  }
  for (LossKind k : kAllLosses) {
    const std::string name(loss_name(k));
    human << std::left << std::setw(10) << name << " max relative error " << std::scientific << std::setprecision(3)
          << per_loss[name] << '\n';
  }
  human << (report.passed ? "PASS" : "FAIL") << " (tolerance " << report.tolerance << ")\n";
  emit(a.common,
       {{"tolerance", report.tolerance},
        {"passed", report.passed},
        {"corrupted", cfg.gradcheck.corrupt},
        {"max_rel_error", per_loss},
        {"cases", cases}},
       human.str());
  return report.passed;
}

// bench --------------------------------------------------------------------

struct BenchArgs {
  Common common;
  std::string image;
  std::optional<int> repetitions;
};

void cmd_bench(const BenchArgs& a) {
  AppConfig cfg = load(a.common);
  if (a.repetitions) cfg.bench.repetitions = *a.repetitions;
  if (cfg.bench.repetitions < 1) throw usage_error("--repetitions must be >= 1");
  const ScalarImage<double> raw = a.image.empty() ? noisy_phantom(cfg.phantom, cfg.seed).image : read_image(a.image);
  const ScalarImage<double> img = normalize_unit(raw);
  ModelSpec model = cfg.run.model;
  model.height = img.height();
  model.width = img.width();
  const ParamSet<double> params = init_params<double>(model);
  const BenchReport r = bench(img, model, params, cfg.clustering, cfg.bench.repetitions);
  emit(a.common,
       {{"convnet_s", r.convnet_s},
        {"rfcm_s", r.rfcm_s},
        {"ratio", r.ratio},
        {"repetitions", r.repetitions},
        {"rfcm_iterations", r.rfcm_iterations},
        {"height", img.height()},
        {"width", img.width()}},
       "infer " + fmt(r.convnet_s) + " s, rfcm " + fmt(r.rfcm_s) + " s, ratio " + fmt(r.ratio) + "\n");
}

// overlay ------------------------------------------------------------------

struct OverlayArgs {
  Common common;
  std::string image, labels, out;
};

void cmd_overlay(const OverlayArgs& a) {
  const ScalarImage<double> img = read_image(a.image);
  const LabelMap labels = read_labels_pgm(a.labels);
  if (labels.height() != img.height() || labels.width() != img.width())
    throw usage_error("image and label map differ in size");
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_ppm(out, render_overlay(normalize_unit(img), labels));
  emit(a.common, {{"overlay", a.out}, {"height", img.height()}, {"width", img.width()}}, "wrote " + a.out + "\n");
}

int exit_code(ErrorKind kind) { return kind == ErrorKind::Numerical ? 3 : 2; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fuzzy clustering segmentation toolkit"};
  app.require_subcommand(1);

  PhantomArgs phantom;
  auto* c_phantom = app.add_subcommand("phantom", "generate phantoms with ground truth");
  add_common(c_phantom, phantom.common);
  c_phantom->add_option("--out-dir", phantom.out_dir);
  c_phantom->add_option("--prefix", phantom.prefix);
  c_phantom->add_option("--count", phantom.count);

  ClusterArgs clusterer;
  auto* c_cluster = app.add_subcommand("cluster", "FCM / RFCM clustering of one image");
  add_common(c_cluster, clusterer.common);
  c_cluster->add_option("--input", clusterer.input)->required();
  c_cluster->add_option("--out-dir", clusterer.out_dir);
  c_cluster->add_option("--normalize", clusterer.normalize)->check(CLI::IsMember({"none", "unit", "zscore"}));
  c_cluster->add_option("--method", clusterer.method)->check(CLI::IsMember({"fcm", "rfcm"}));
  c_cluster->add_option("--beta", clusterer.beta);
  c_cluster->add_option("--q", clusterer.q);

  TrainArgs trainer;
  auto* c_train = app.add_subcommand("train", "train a model on a directory of images");
  add_common(c_train, trainer.common);
  c_train->add_option("--data", trainer.data)->required();
  c_train->add_option("--checkpoint", trainer.checkpoint)->required();
  c_train->add_option("--log", trainer.log, "CSV log (default <checkpoint>.log.csv)");
  c_train->add_option("--steps", trainer.steps);
  c_train->add_option("--loss", trainer.loss);
  c_train->add_option("--regime", trainer.regime);
  c_train->add_option("--alpha", trainer.alpha);
  c_train->add_option("--beta", trainer.beta);

  SegmentArgs segmenter;
  auto* c_segment = app.add_subcommand("segment", "segment images with a trained checkpoint");
  add_common(c_segment, segmenter.common);
  c_segment->add_option("--checkpoint", segmenter.checkpoint)->required();
  c_segment->add_option("--input", segmenter.input);
  c_segment->add_option("--data", segmenter.data);
  c_segment->add_option("--out-dir", segmenter.out_dir);

  EvalArgs evaluator;
  auto* c_eval = app.add_subcommand("eval", "score predicted label maps against ground truth");
  add_common(c_eval, evaluator.common);
  c_eval->add_option("--pred", evaluator.pred)->required();
  c_eval->add_option("--truth", evaluator.truth)->required();
  c_eval->add_option("--out-dir", evaluator.out_dir);

  GradcheckArgs gradchecker;
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference check of every loss gradient");
  add_common(c_grad, gradchecker.common);
  c_grad->add_flag("--corrupt", gradchecker.corrupt, "perturb analytic gradients (must fail)");
  c_grad->add_option("--instances", gradchecker.instances);

  BenchArgs bencher;
  auto* c_bench = app.add_subcommand("bench", "time inference against RFCM convergence");
  add_common(c_bench, bencher.common);
  c_bench->add_option("--image", bencher.image);
  c_bench->add_option("--repetitions", bencher.repetitions);

  OverlayArgs overlay;
  auto* c_overlay = app.add_subcommand("overlay", "render labels over an image as PPM");
  add_common(c_overlay, overlay.common);
  c_overlay->add_option("--image", overlay.image)->required();
  c_overlay->add_option("--labels", overlay.labels)->required();
  c_overlay->add_option("--out", overlay.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_phantom->parsed()) cmd_phantom(phantom);
    if (c_cluster->parsed()) cmd_cluster(clusterer);
    if (c_train->parsed()) cmd_train(trainer);
    if (c_segment->parsed()) cmd_segment(segmenter);
    if (c_eval->parsed()) cmd_eval(evaluator);
    if (c_grad->parsed() && !cmd_gradcheck(gradchecker)) return 3;
    if (c_bench->parsed()) cmd_bench(bencher);
    if (c_overlay->parsed()) cmd_overlay(overlay);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
