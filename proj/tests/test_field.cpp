#include "support.hpp"

#include <cmath>

using namespace testing;

TEST_CASE("zscore of a symmetric pair") {
  const auto out = normalize_zscore(image(1, 2, {0, 2}));
  CHECK(out[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zscore rejects a constant image") {
  CHECK(error_text_of([] { normalize_zscore(image(1, 3, {5, 5, 5})); }).find("zero variance") != std::string::npos);
}

TEST_CASE("zscore moments on random fields") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = normalize_zscore(random_image(8, 8, seed, -3.0, 7.0));
    const double mean = out.flat().mean();
    const double var = (out.flat().array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }
}

TEST_CASE("unit normalization") {
  const auto a = normalize_unit(image(1, 2, {-400, 400}));
  CHECK(a[0] == 0.0);
  CHECK(a[1] == 1.0);
  const auto b = normalize_unit(image(1, 3, {1, 3, 5}));
  CHECK(b[0] == 0.0);
  CHECK(b[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b[2] == 1.0);
  const auto c = image(1, 4, {0, 0.25, 0.6, 1});
  CHECK((normalize_unit(c).pixels() - c.pixels()).abs().maxCoeff() < 1e-12);
  CHECK(error_text_of([] { normalize_unit(image(1, 2, {3, 3})); }).find("zero range") != std::string::npos);
}

TEST_CASE("unit normalization is idempotent") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto once = normalize_unit(random_image(6, 7, seed, -50, 50));
    const auto twice = normalize_unit(once);
    CHECK((once.pixels() - twice.pixels()).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("gamma correction") {
  CHECK(gamma_correct(image(1, 1, {0.25}), 2.0)[0] == doctest::Approx(0.0625).epsilon(1e-15));
  const auto img = random_image(4, 4, 3);
  CHECK((gamma_correct(img, 1.0).pixels() == img.pixels()).all());
  for (double g : {0.5, 0.9, 1.1, 3.0}) {
    const auto fixed = gamma_correct(image(1, 2, {0, 1}), g);
    CHECK(fixed[0] == 0.0);
    CHECK(fixed[1] == 1.0);
  }
  CHECK(error_kind_of([] { gamma_correct(image(1, 1, {0.5}), 0.0); }) == ErrorKind::Usage);
  CHECK(error_kind_of([] { gamma_correct(image(1, 1, {0.5}), -1.0); }) == ErrorKind::Usage);
  CHECK(error_kind_of([] { gamma_correct(image(1, 1, {1.5}), 2.0); }) == ErrorKind::Usage);
}

TEST_CASE("gamma correction preserves order") {
  const auto img = random_image(5, 5, 9);
  const auto out = gamma_correct(img, 1.7);
  for (Index a = 0; a < img.size(); ++a)
    for (Index b = 0; b < img.size(); ++b)
      if (img[a] < img[b]) CHECK(out[a] <= out[b]);
}

TEST_CASE("hard classification and ties") {
  ChannelArray<double> v(2, 3);
  v << 0.1, 0.7, 0.2, 0.5, 0.5, 0.0;
  const LabelMap l = hard_classify(MembershipField<double>(1, 2, v));
  CHECK(l[0] == 1);
  CHECK(l[1] == 0);
}

TEST_CASE("one hot") {
  const LabelMap l = labels(2, 2, 3, {0, 1, 2, 0});
  const auto g = one_hot<double>(l, 3);
  const double expected[4][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
  for (Index j = 0; j < 4; ++j)
    for (Index k = 0; k < 3; ++k) CHECK(g.values()(j, k) == expected[j][k]);
  CHECK(hard_classify(g.field()) == l);
  CHECK(error_kind_of([] { one_hot<double>(labels(1, 1, 3, {2}), 2); }) == ErrorKind::Usage);
}

TEST_CASE("one hot round trip on random maps") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LabelMap l = random_labels(7, 5, 4, seed);
    CHECK(hard_classify(one_hot<double>(l, 4).field()) == l);
  }
}

TEST_CASE("hard classification is invariant under a monotone transform") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = random_membership(6, 6, 3, seed);
    ChannelArray<double> t = (f.values() * 5.0).exp();
    for (Index j = 0; j < t.rows(); ++j) t.row(j) /= t.row(j).sum();
    CHECK(hard_classify(MembershipField<double>(6, 6, t)) == hard_classify(f));
  }
}

TEST_CASE("membership invariants are enforced") {
  ChannelArray<double> bad(1, 2);
  bad << 0.6, 0.6;
  CHECK(error_kind_of([&] { MembershipField<double>(1, 1, bad); }) == ErrorKind::Usage);
  ChannelArray<double> neg(1, 2);
  neg << -0.1, 1.1;
  CHECK(error_kind_of([&] { MembershipField<double>(1, 1, neg); }) == ErrorKind::Usage);
  ChannelArray<double> one(1, 1);
  one << 1.0;
  CHECK(error_kind_of([&] { MembershipField<double>(1, 1, one); }) == ErrorKind::Usage);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = random_membership(4, 4, 3, seed);
    CHECK((f.values().rowwise().sum() - 1.0).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("image invariants are enforced") {
  PlaneArray<double> p = PlaneArray<double>::Zero(2, 2);
  CHECK(error_kind_of([&] { ScalarImage<double>(p, Spacing{0.0, 1.0}); }) == ErrorKind::Usage);
  p(0, 0) = std::nan("");
  CHECK(error_kind_of([&] { ScalarImage<double>{p}; }) == ErrorKind::Usage);
  CHECK(error_kind_of([] { labels(1, 2, 2, {0, 2}); }) == ErrorKind::Usage);
  ChannelArray<double> soft(1, 2);
  soft << 0.5, 0.5;
  CHECK(error_kind_of([&] { GroundTruth<double>(MembershipField<double>(1, 1, soft)); }) == ErrorKind::Usage);
}
