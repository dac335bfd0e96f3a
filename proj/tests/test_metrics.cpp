#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spice/metrics.hpp"
#include "spice/rng.hpp"

using namespace spice;
using namespace spice::metrics;

namespace {

conformal::PredictionSet interval_set(double lo, double hi) {
  conformal::PredictionSet s;
  s.raw = {{lo, hi}};
  s.raw_size = hi - lo;
  return s;
}

conformal::PredictionSet empty_set() { return conformal::PredictionSet{}; }

}  // namespace

TEST_CASE("marginal_coverage") {
  std::vector<conformal::PredictionSet> full(4, interval_set(0.0, 1.0));
  const std::vector<double> inside{0.1, 0.5, 0.9, 1.0};
  CHECK(marginal_coverage(full, inside) == 1.0);

  std::vector<conformal::PredictionSet> none(4, empty_set());
  CHECK(marginal_coverage(none, inside) == 0.0);

  std::vector<conformal::PredictionSet> half{interval_set(0.0, 0.2), interval_set(0.6, 0.7),
                                             interval_set(0.8, 1.0), interval_set(0.0, 0.5)};
  CHECK(marginal_coverage(half, inside) == 0.5);

  CHECK_THROWS_AS(marginal_coverage(full, std::vector<double>{0.1}), ConfigError);
}

TEST_CASE("normalization_constant") {
  SUBCASE("near-uniform targets keep about (1-alpha) of the range") {
    Rng rng(1);
    std::vector<double> train(2000), cal(400);
    for (double& v : train) v = rng.uniform(0.0, 1.0);
    for (double& v : cal) v = rng.uniform(0.0, 1.0);
    const double c = normalization_constant(train, cal, 0.1);
    const double range = *std::max_element(train.begin(), train.end()) -
                         *std::min_element(train.begin(), train.end());
    CHECK(c >= 0.9 * range - range / 20.0);
    CHECK(c <= 0.9 * range + range / 20.0);
  }
  SUBCASE("all mass in one bin keeps exactly that bin") {
    std::vector<double> train(100, 0.5), cal(50, 0.5);
    train.front() = 0.0;
    train.back() = 1.0;  // fix the range to [0,1] without moving the mass bin
    const double c = normalization_constant(train, cal, 0.1);
    CHECK(c == doctest::Approx(1.0 / 20.0).epsilon(1e-12));
  }
  SUBCASE("always positive") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> train(200), cal(100);
      for (double& v : train) v = rng.uniform(-3.0, 5.0);
      for (double& v : cal) v = rng.uniform(-3.0, 5.0);
      CHECK(normalization_constant(train, cal, 0.1) > 0.0);
    }
  }
  SUBCASE("degenerate range rejected") {
    std::vector<double> flat(50, 1.0);
    CHECK_THROWS_AS(normalization_constant(flat, flat, 0.1), ConfigError);
  }
}

TEST_CASE("label_conditional_coverage") {
  SUBCASE("all covered") {
    std::vector<conformal::PredictionSet> sets(10, interval_set(0.0, 1.0));
    std::vector<double> truths;
    for (int i = 0; i < 10; ++i) truths.push_back(i / 9.0);
    double worst = -1.0;
    const auto buckets = label_conditional_coverage(sets, truths, &worst);
    for (double b : buckets) CHECK(b == 1.0);
    CHECK(worst == 1.0);
  }
  SUBCASE("one bucket fully uncovered") {
    // truths spread over [0,1); the last fifth is never covered
    std::vector<conformal::PredictionSet> sets;
    std::vector<double> truths;
    for (int i = 0; i < 20; ++i) {
      const double y = i / 19.0;
      truths.push_back(y);
      sets.push_back(y > 0.8 ? empty_set() : interval_set(0.0, 1.0));
    }
    double worst = -1.0;
    label_conditional_coverage(sets, truths, &worst);
    CHECK(worst == 0.0);
  }
  SUBCASE("empty buckets are excluded from the minimum") {
    // all truths in the bottom fifth -> four empty buckets
    std::vector<conformal::PredictionSet> sets(6, interval_set(0.0, 1.0));
    std::vector<double> truths{0.0, 0.01, 0.02, 0.03, 0.04, 1.0};
    sets[5] = interval_set(0.0, 1.0);
    double worst = -1.0;
    const auto buckets = label_conditional_coverage(sets, truths, &worst);
    CHECK(std::isnan(buckets[1]));
    CHECK(worst == 1.0);
  }
  SUBCASE("too few samples rejected") {
    std::vector<conformal::PredictionSet> sets(3, interval_set(0.0, 1.0));
    CHECK_THROWS_AS(label_conditional_coverage(sets, std::vector<double>{1, 2, 3}, nullptr),
                    ConfigError);
  }
}

TEST_CASE("evaluate and serialization") {
  std::vector<conformal::PredictionSet> sets;
  std::vector<double> truths;
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const double y = i / 49.0;
    truths.push_back(y);
    sets.push_back(i % 10 == 0 ? empty_set() : interval_set(y - 0.05, y + 0.05));
  }
  const EvalReport r = evaluate(sets, truths, 0.1, 2.0);
  CHECK(r.count == 50);
  CHECK(r.coverage == doctest::Approx(0.9));
  CHECK(r.mean_size == doctest::Approx(0.1 * 45.0 / 50.0));
  CHECK(r.mean_normalized_size == doctest::Approx(r.mean_size / 2.0));
  CHECK(r.worst_bucket <= r.coverage);

  const std::string j = report_json(r);
  CHECK(j.find("\"coverage\":") != std::string::npos);
  CHECK(j.find("\"worst_bucket\":") != std::string::npos);
  const std::string header = report_csv_header();
  const std::string row = report_csv_row(r);
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(row.begin(), row.end(), ','));

  CHECK_THROWS_AS(evaluate(sets, truths, 0.1, 0.0), ConfigError);
}
