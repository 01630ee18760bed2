#ifndef FUZZYSEG_TEST_SUPPORT_HPP
#define FUZZYSEG_TEST_SUPPORT_HPP

#include "fuzzyseg/field.hpp"
#include "fuzzyseg/rng.hpp"

#include <doctest.h>

#include <filesystem>
#include <initializer_list>
#include <string>

namespace testing {

using namespace fuzzyseg;

inline ScalarImage<double> image(Index h, Index w, std::initializer_list<double> values, Spacing spacing = {}) {
  REQUIRE(static_cast<Index>(values.size()) == h * w);
  PlaneArray<double> p(h, w);
  Index j = 0;
  for (double v : values) p.data()[j++] = v;
  return ScalarImage<double>(std::move(p), spacing);
}

inline ScalarImage<double> random_image(Index h, Index w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  CounterRng rng(seed, 11);
  PlaneArray<double> p(h, w);
  for (Index j = 0; j < p.size(); ++j) p.data()[j] = rng.uniform(lo, hi);
  return ScalarImage<double>(std::move(p));
}

inline ChannelArray<double> random_logits(Index n, Index c, std::uint64_t seed, double scale = 2.0) {
  CounterRng rng(seed, 12);
  ChannelArray<double> z(n, c);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-scale, scale);
  return z;
}

inline MembershipField<double> random_membership(Index h, Index w, Index c, std::uint64_t seed) {
  ChannelArray<double> z = random_logits(h * w, c, seed).exp();
  for (Index j = 0; j < z.rows(); ++j) z.row(j) /= z.row(j).sum();
  return MembershipField<double>(h, w, std::move(z));
}

inline LabelMap labels(Index h, Index w, int classes, std::initializer_list<int> values) {
  REQUIRE(static_cast<Index>(values.size()) == h * w);
  LabelArray a(h, w);
  Index j = 0;
  for (int v : values) a.data()[j++] = v;
  return LabelMap(std::move(a), classes);
}

inline LabelMap random_labels(Index h, Index w, int classes, std::uint64_t seed) {
  CounterRng rng(seed, 13);
  LabelArray a(h, w);
  for (Index j = 0; j < a.size(); ++j) a.data()[j] = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(classes));
  return LabelMap(std::move(a), classes);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fuzzyseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

template <typename Fn>
ErrorKind error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Usage;
}

template <typename Fn>
std::string error_text_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected an error");
  return {};
}

}  // namespace testing

#endif  // FUZZYSEG_TEST_SUPPORT_HPP
