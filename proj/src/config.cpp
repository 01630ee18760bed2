#include "fuzzyseg/config.hpp"

#include <fstream>
#include <set>
#include <string>

namespace fuzzyseg {

namespace {

using nlohmann::json;

/// Reads keys out of one JSON object and rejects any it was not asked about.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw usage_error("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw usage_error("config: '" + path_ + "." + key + "' has the wrong type");
    }
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key) ? &doc_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : doc_.items())
      if (!seen_.count(item.key())) throw usage_error("config: unknown key '" + path_ + "." + item.key() + "'");
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

Connectivity parse_connectivity(int value) {
  if (value == 4) return Connectivity::Four;
  if (value == 8) return Connectivity::Eight;
  throw usage_error("config: connectivity must be 4 or 8");
}

template <typename Enum>
Enum pick(const std::string& value, std::initializer_list<std::pair<const char*, Enum>> options,
          const std::string& key) {
  for (const auto& [name, e] : options)
    if (value == name) return e;
  throw usage_error("config: unsupported value '" + value + "' for " + key);
}

void read_clustering(const json& doc, AppConfig& cfg) {
  Section s(doc, "clustering");
  std::string method = cfg.cluster_method == ClusterMethod::Fcm ? "fcm" : "rfcm";
  std::string init = "quantile";
  int connectivity = 4;
  FcmConfig& c = cfg.clustering;
  s.get("method", method);
  s.get("classes", c.classes);
  s.get("q", c.q);
  s.get("beta", c.beta);
  s.get("tol", c.tol);
  s.get("max_iter", c.max_iter);
  s.get("init", init);
  s.get("means", c.means);
  s.get("connectivity", connectivity);
  s.finish();
  cfg.cluster_method = pick<ClusterMethod>(method, {{"fcm", ClusterMethod::Fcm}, {"rfcm", ClusterMethod::Rfcm}},
                                           "clustering.method");
  c.init = pick<InitMode>(init, {{"quantile", InitMode::Quantile}, {"provided", InitMode::Provided}},
                          "clustering.init");
  c.neighborhood.connectivity = parse_connectivity(connectivity);
}

void read_loss(const json& doc, RunConfig& run) {
  Section s(doc, "loss");
  std::string kind(loss_name(run.loss));
  std::string means_mode = "detached";
  int connectivity = 4;
  LossConfig& l = run.loss_config;
  s.get("kind", kind);
  s.get("q", l.q);
  s.get("beta", l.beta);
  s.get("alpha", l.alpha);
  s.get("lambda", l.lambda);
  s.get("means_mode", means_mode);
  s.get("connectivity", connectivity);
  s.finish();
  run.loss = parse_loss_kind(kind);
  l.means_mode = pick<MeansMode>(
      means_mode, {{"detached", MeansMode::Detached}, {"differentiated", MeansMode::Differentiated}}, "loss.means_mode");
  l.neighborhood.connectivity = parse_connectivity(connectivity);
}

void read_model(const json& doc, ModelSpec& m) {
  Section s(doc, "model");
  std::string kind = m.kind == ModelKind::ConvStack ? "conv_stack" : "logit_field";
  s.get("kind", kind);
  s.get("layers", m.layers);
  s.get("channels", m.channels);
  s.get("classes", m.classes);
  s.get("height", m.height);
  s.get("width", m.width);
  s.finish();
  m.kind = pick<ModelKind>(kind, {{"conv_stack", ModelKind::ConvStack}, {"logit_field", ModelKind::LogitField}},
                           "model.kind");
}

void read_optimizer(const json& doc, OptimizerConfig& o) {
  Section s(doc, "optimizer");
  std::string method = o.method == OptimMethod::Adam ? "adam" : "sgd";
  s.get("method", method);
  s.get("learning_rate", o.learning_rate);
  s.get("beta1", o.beta1);
  s.get("beta2", o.beta2);
  s.get("epsilon", o.epsilon);
  s.get("steps", o.steps);
  s.finish();
  o.method = pick<OptimMethod>(method, {{"adam", OptimMethod::Adam}, {"sgd", OptimMethod::Sgd}}, "optimizer.method");
}

void read_training(const json& doc, RunConfig& run) {
  Section s(doc, "training");
  std::string regime = regime_name(run.regime);
  std::string normalization = normalization_name(run.normalization);
  s.get("regime", regime);
  s.get("normalization", normalization);
  s.get("gammas", run.gammas);
  s.get("eval_every", run.eval_every);
  s.get("validation", run.validation);
  s.finish();
  run.regime = parse_regime(regime);
  run.normalization = parse_normalization(normalization);
}

void read_metrics(const json& doc, AppConfig& cfg) {
  Section s(doc, "metrics");
  if (const json* classes = s.child("classes")) {
    if (!classes->is_array()) throw usage_error("config: metrics.classes must be an array");
    cfg.metric_classes.clear();
    for (const json& item : *classes) {
      Section c(item, "metrics.classes[]");
      ClassSpec spec;
      c.get("label", spec.label);
      c.get("name", spec.name);
      c.get("tau", spec.tau);
      c.finish();
      if (!(spec.tau >= 0.0)) throw usage_error("config: metric tolerance must be >= 0");
      cfg.metric_classes.push_back(spec);
    }
  }
  s.finish();
}

void read_phantom(const json& doc, PhantomOptions& p) {
  Section s(doc, "phantom");
  s.get("height", p.height);
  s.get("width", p.width);
  s.get("bones", p.bones);
  s.get("lesions", p.lesions);
  s.get("count", p.count);
  s.get("gaussian_sigma", p.gaussian_sigma);
  s.get("poisson_scale", p.poisson_scale);
  s.finish();
  if (p.height < 8 || p.width < 8) throw usage_error("config: phantom must be at least 8x8");
  if (p.bones < 0 || p.lesions < 0 || p.count < 1) throw usage_error("config: bad phantom counts");
  if (p.lesions > 0 && p.bones == 0) throw usage_error("config: lesions need at least one bone");
}

void read_bench(const json& doc, BenchOptions& b) {
  Section s(doc, "bench");
  s.get("repetitions", b.repetitions);
  s.finish();
  if (b.repetitions < 1) throw usage_error("config: bench.repetitions must be >= 1");
}

void read_gradcheck(const json& doc, GradcheckOptions& g) {
  Section s(doc, "gradcheck");
  s.get("instances", g.instances);
  s.get("height", g.height);
  s.get("width", g.width);
  s.get("classes", g.classes);
  s.get("step", g.step);
  s.get("tolerance", g.tolerance);
  s.get("corrupt", g.corrupt);
  s.finish();
  if (g.instances < 1 || g.height < 3 || g.width < 3 || g.classes < 2 || !(g.step > 0.0))
    throw usage_error("config: bad gradcheck options");
}

}  // namespace

void AppConfig::apply_seed(std::uint64_t s) {
  seed = s;
  clustering.seed = s;
  run.seed = s;
  run.model.seed = s;
}

AppConfig parse_config(const json& doc) {
  AppConfig cfg;
  Section top(doc, "$");
  std::uint64_t seed = 0;
  top.get("seed", seed);
  if (const json* c = top.child("clustering")) read_clustering(*c, cfg);
  if (const json* c = top.child("loss")) read_loss(*c, cfg.run);
  if (const json* c = top.child("model")) read_model(*c, cfg.run.model);
  if (const json* c = top.child("optimizer")) read_optimizer(*c, cfg.run.optimizer);
  if (const json* c = top.child("training")) read_training(*c, cfg.run);
  if (const json* c = top.child("metrics")) read_metrics(*c, cfg);
  if (const json* c = top.child("phantom")) read_phantom(*c, cfg.phantom);
  if (const json* c = top.child("bench")) read_bench(*c, cfg.bench);
  if (const json* c = top.child("gradcheck")) read_gradcheck(*c, cfg.gradcheck);
  top.finish();
  cfg.apply_seed(seed);
  cfg.clustering.validate();
  cfg.run.validate();
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw usage_error("config: " + std::string(e.what()));
  }
  return parse_config(doc);
}

json to_json(const ModelSpec& spec) {
  return {{"kind", spec.kind == ModelKind::ConvStack ? "conv_stack" : "logit_field"},
          {"layers", spec.layers},
          {"channels", spec.channels},
          {"classes", spec.classes},
          {"height", spec.height},
          {"width", spec.width}};
}

ModelSpec model_from_json(const json& doc) {
  ModelSpec spec;
  read_model(doc, spec);
  spec.validate();
  return spec;
}

json to_json(const AppConfig& cfg) {
  const FcmConfig& c = cfg.clustering;
  const RunConfig& r = cfg.run;
  json metrics = json::array();
  for (const ClassSpec& s : cfg.metric_classes) metrics.push_back({{"label", s.label}, {"name", s.name}, {"tau", s.tau}});
  return {
      {"seed", cfg.seed},
      {"clustering",
       {{"method", cfg.cluster_method == ClusterMethod::Fcm ? "fcm" : "rfcm"},
        {"classes", c.classes},
        {"q", c.q},
        {"beta", c.beta},
        {"tol", c.tol},
        {"max_iter", c.max_iter},
        {"init", c.init == InitMode::Quantile ? "quantile" : "provided"},
        {"means", c.means},
        {"connectivity", c.neighborhood.size()}}},
      {"loss",
       {{"kind", std::string(loss_name(r.loss))},
        {"q", r.loss_config.q},
        {"beta", r.loss_config.beta},
        {"alpha", r.loss_config.alpha},
        {"lambda", r.loss_config.lambda},
        {"means_mode", r.loss_config.means_mode == MeansMode::Detached ? "detached" : "differentiated"},
        {"connectivity", r.loss_config.neighborhood.size()}}},
      {"model", to_json(r.model)},
      {"optimizer",
       {{"method", r.optimizer.method == OptimMethod::Adam ? "adam" : "sgd"},
        {"learning_rate", r.optimizer.learning_rate},
        {"beta1", r.optimizer.beta1},
        {"beta2", r.optimizer.beta2},
        {"epsilon", r.optimizer.epsilon},
        {"steps", r.optimizer.steps}}},
      {"training",
       {{"regime", regime_name(r.regime)},
        {"normalization", normalization_name(r.normalization)},
        {"gammas", r.gammas},
        {"eval_every", r.eval_every},
        {"validation", r.validation}}},
      {"metrics", {{"classes", metrics}}},
      {"phantom",
       {{"height", cfg.phantom.height},
        {"width", cfg.phantom.width},
        {"bones", cfg.phantom.bones},
        {"lesions", cfg.phantom.lesions},
        {"count", cfg.phantom.count},
        {"gaussian_sigma", cfg.phantom.gaussian_sigma},
        {"poisson_scale", cfg.phantom.poisson_scale}}},
      {"bench", {{"repetitions", cfg.bench.repetitions}}},
      {"gradcheck",
       {{"instances", cfg.gradcheck.instances},
        {"height", cfg.gradcheck.height},
        {"width", cfg.gradcheck.width},
        {"classes", cfg.gradcheck.classes},
        {"step", cfg.gradcheck.step},
        {"tolerance", cfg.gradcheck.tolerance},
        {"corrupt", cfg.gradcheck.corrupt}}},
  };
}

}  // namespace fuzzyseg
