#include "support.hpp"

#include <cmath>
#include <vector>

using namespace testing;

TEST_CASE("stream 0 reproduces the splitmix64 reference sequence") {
  CounterRng rng(0, 0);
  CHECK(rng.next_u64() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next_u64() == 0x6E789E6AA1B965F4ULL);
  CHECK(rng.next_u64() == 0x06C45D188009454FULL);
}

TEST_CASE("draws are addressable and deterministic") {
  CounterRng a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.counter() == 100);
  CounterRng c(42, 7);
  CHECK(c.at(50) == CounterRng(42, 7).at(50));
  CHECK(CounterRng(42, 7).at(0) != CounterRng(42, 8).at(0));
  CHECK(CounterRng(42, 7).at(0) != CounterRng(43, 7).at(0));
}

TEST_CASE("uniform moments") {
  CounterRng rng(1, 1);
  const int n = 200000;
  double sum = 0, sq = 0, lo = 1, hi = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    sum += u;
    sq += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(std::abs(sum / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sq / n - sum * sum / n / n - 1.0 / 12) < 2e-3);
}

TEST_CASE("normal moments") {
  CounterRng rng(2, 1);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("poisson mean and variance on both branches") {
  for (double mean : {0.5, 3.0, 9.5, 10.0, 42.0, 900.0}) {
    CounterRng rng(3, static_cast<std::uint64_t>(mean * 10));
    const int n = 100000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<double>(rng.poisson(mean));
      sum += k;
      sq += k * k;
    }
    const double m = sum / n, var = sq / n - m * m;
    CAPTURE(mean);
    CHECK(std::abs(m - mean) < 5 * std::sqrt(mean / n));
    CHECK(std::abs(var / mean - 1.0) < 0.05);
  }
  CounterRng rng(3, 0);
  CHECK(rng.poisson(0.0) == 0);
}
