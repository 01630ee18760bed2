#include "fuzzyseg/gradcheck.hpp"

#include "support.hpp"

using namespace testing;

TEST_CASE("every loss, model kind and means mode passes") {
  GradcheckOptions opts;
  opts.instances = 3;
  const GradcheckReport report = run_gradcheck(opts, 5);
  CHECK(report.passed);
  CHECK(report.results.size() == std::size(kAllLosses) * 2 * 2);
  for (const GradcheckResult& r : report.results) {
    CAPTURE(loss_name(r.loss));
    CAPTURE(model_kind_name(r.model));
    CHECK(r.passed);
    CHECK(r.instances == 3);
    CHECK(r.max_rel_error < opts.tolerance);
  }
}

TEST_CASE("a corrupted gradient is caught") {
  GradcheckOptions opts;
  opts.instances = 1;
  opts.corrupt = true;
  const GradcheckReport report = run_gradcheck(opts, 5);
  CHECK(!report.passed);
  for (const GradcheckResult& r : report.results) CHECK(r.max_rel_error > 1e-3);
}

TEST_CASE("check loss weights switch every term on") {
  const LossConfig cfg = gradcheck_loss_config(1.5, MeansMode::Differentiated);
  CHECK(cfg.q == 1.5);
  CHECK(cfg.beta > 0.0);
  CHECK(cfg.alpha > 0.0);
  CHECK(cfg.lambda > 0.0);
  CHECK(means_mode_name(cfg.means_mode) == "differentiated");
}
