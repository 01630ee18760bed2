#include "fuzzyseg/io.hpp"
#include "fuzzyseg/pipeline.hpp"

#include "support.hpp"

#include <fstream>

using namespace testing;

TEST_CASE("noisy phantom") {
  PhantomOptions opts;
  opts.height = opts.width = 32;
  const PhantomPair clean = noisy_phantom(opts, 3);
  CHECK(clean.image.pixels().minCoeff() == 1.0);
  opts.gaussian_sigma = 0.01;
  const PhantomPair noisy = noisy_phantom(opts, 3);
  CHECK((noisy.truth.labels() == clean.truth.labels()).all());
  const PlaneArray<double> diff = noisy.image.pixels() - normalize_unit(clean.image).pixels();
  CHECK(diff.abs().maxCoeff() > 0.0);
  CHECK(diff.abs().maxCoeff() < 0.06);
  CHECK((noisy_phantom(opts, 3).image.pixels() == noisy.image.pixels()).all());
}

TEST_CASE("clustering orders classes by mean") {
  PhantomOptions opts;
  opts.height = opts.width = 48;
  const PhantomPair p = noisy_phantom(opts, 4);
  FcmConfig cfg;
  for (ClusterMethod m : {ClusterMethod::Fcm, ClusterMethod::Rfcm}) {
    const auto state = cluster(p.image, m, cfg);
    CHECK(state.means(0) < state.means(1));
    CHECK(state.means(1) < state.means(2));
    const LabelMap labels = hard_classify(state.memberships);
    CHECK((labels.labels() == p.truth.labels()).all());
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = scratch("checkpoint");
  Checkpoint ckpt;
  ckpt.model.layers = 2;
  ckpt.model.channels = 3;
  ckpt.model.seed = 9;
  ckpt.params = init_params(ckpt.model);
  ckpt.regime = Regime::Semi;
  ckpt.loss = LossKind::SemiRfcm;
  ckpt.normalization = Normalization::Unit;
  ckpt.q = 1.5;
  ckpt.seed = 9;
  save_checkpoint(dir / "model.fd1", ckpt);
  CHECK(std::filesystem::exists(dir / "model.fd1.json"));
  const Checkpoint back = load_checkpoint(dir / "model.fd1");
  CHECK((back.params.values.array() == ckpt.params.values.array()).all());
  CHECK(back.params.shapes.size() == ckpt.params.shapes.size());
  CHECK(back.model.channels == 3);
  CHECK(back.regime == Regime::Semi);
  CHECK(back.loss == LossKind::SemiRfcm);
  CHECK(back.normalization == Normalization::Unit);
  CHECK(back.q == 1.5);

  // A sidecar whose shape table disagrees with the model is rejected.
  {
    std::ifstream in(dir / "model.fd1.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    doc["model"]["channels"] = 4;
    std::ofstream(dir / "model.fd1.json") << doc.dump();
  }
  CHECK(error_kind_of([&] { load_checkpoint(dir / "model.fd1"); }) == ErrorKind::Io);
  CHECK(error_kind_of([&] { load_checkpoint(dir / "absent.fd1"); }) == ErrorKind::Io);
}

TEST_CASE("segment applies preprocessing and class ordering") {
  Checkpoint ckpt;
  ckpt.model.layers = 1;
  ckpt.model.channels = 2;
  ckpt.params = init_params(ckpt.model);
  const auto raw = random_image(10, 10, 2, 0, 50);
  const auto f = segment(ckpt, raw);
  const auto direct = infer(ckpt.params, ckpt.model, preprocess(raw, ckpt.normalization));
  const auto order = class_order(preprocess(raw, ckpt.normalization), direct, ckpt.q);
  CHECK((f.values() == permute_classes(direct, order).values()).all());
  const ClassMeans<double> v = means_update(preprocess(raw, ckpt.normalization), f, ckpt.q);
  CHECK(v(0) <= v(1));
  CHECK(v(1) <= v(2));
}

TEST_CASE("bench reports both timings") {
  PhantomOptions opts;
  opts.height = opts.width = 32;
  ModelSpec model;
  model.layers = 1;
  model.channels = 2;
  const BenchReport r = bench(normalize_unit(noisy_phantom(opts, 1).image), model, init_params(model), FcmConfig{}, 3);
  CHECK(r.repetitions == 3);
  CHECK(r.convnet_s > 0.0);
  CHECK(r.rfcm_s > 0.0);
  CHECK(r.ratio == doctest::Approx(r.rfcm_s / r.convnet_s));
  CHECK(r.rfcm_iterations >= 1);
}
