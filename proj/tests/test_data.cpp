#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "spice/data.hpp"

using namespace spice;
using namespace spice::data;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& content) {
    static int counter = 0;
    path = "test_data_tmp_" + std::to_string(counter++) + ".csv";
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_csv") {
  SUBCASE("3 rows, 2 features") {
    TempFile f("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
    const RawDataset ds = load_csv(f.path, "y");
    CHECK(ds.dim == 2);
    CHECK(ds.rows() == 3);
    CHECK(ds.row(1)[0] == 4.0);
    CHECK(ds.y[2] == 9.0);
    CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("target column in the middle") {
    TempFile f("a,y,b\n1,2,3\n");
    const RawDataset ds = load_csv(f.path, "y");
    CHECK(ds.y[0] == 2.0);
    CHECK(ds.row(0)[1] == 3.0);
  }
  SUBCASE("header-only file") {
    TempFile f("a,y\n");
    CHECK_THROWS_AS(load_csv(f.path, "y"), IngestError);
  }
  SUBCASE("missing target column") {
    TempFile f("a,b\n1,2\n");
    CHECK_THROWS_AS(load_csv(f.path, "y"), IngestError);
  }
  SUBCASE("non-numeric cell cites its row") {
    TempFile f("a,y\n1,2\n3,4\n5,6\n7,8\nabc,10\n");
    try {
      load_csv(f.path, "y");
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(std::string(e.what()).find("row 5") != std::string::npos);
    }
  }
}

TEST_CASE("synthetic_bimodal") {
  const RawDataset ds = synthetic_bimodal(2000, 0);
  REQUIRE(ds.rows() == 2000);
  CHECK(ds.x.front() == 0.0);
  CHECK(ds.x.back() == 1.0);
  CHECK(std::abs(ds.y.front()) == doctest::Approx(0.1));  // sigma(0) = 0.1 always
  for (size_t i = 0; i < ds.rows(); ++i) {
    const double lim = 0.1 + ds.x[i];
    CHECK(std::abs(ds.y[i]) >= 0.1 - 1e-12);
    CHECK(std::abs(ds.y[i]) <= lim + 1e-12);
  }
  double mean = 0.0, sq = 0.0;
  for (double y : ds.y) mean += y;
  mean /= 2000.0;
  for (double y : ds.y) sq += (y - mean) * (y - mean);
  const double sd = std::sqrt(sq / 1999.0);
  CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(2000.0));

  // determinism and seed sensitivity
  const RawDataset again = synthetic_bimodal(2000, 0);
  CHECK(again.y == ds.y);
  const RawDataset other = synthetic_bimodal(2000, 1);
  CHECK(other.y != ds.y);

  CHECK_THROWS_AS(synthetic_bimodal(1, 0), ConfigError);
}

TEST_CASE("preprocess") {
  const RawDataset raw = synthetic_bimodal(2000, 0);
  const DatasetBundle b = preprocess(raw, 0);

  SUBCASE("split sizes follow 50/10/10/10/20") {
    size_t n[5] = {0, 0, 0, 0, 0};
    for (Split s : b.split) n[static_cast<size_t>(s)]++;
    CHECK(n[0] == 1000);  // train
    CHECK(n[1] == 200);   // val
    CHECK(n[2] == 200);   // cal
    CHECK(n[3] == 200);   // calval
    CHECK(n[4] == 400);   // test
  }

  SUBCASE("train targets scale into [0,1] hitting both endpoints") {
    double mn = 1e9, mx = -1e9;
    for (size_t i = 0; i < b.rows(); ++i) {
      if (b.split[i] != Split::kTrain) continue;
      mn = std::min(mn, b.y_scaled[i]);
      mx = std::max(mx, b.y_scaled[i]);
    }
    CHECK(mn == 0.0);
    CHECK(mx == 1.0);
  }

  SUBCASE("scale round trip") {
    for (size_t i = 0; i < 50; ++i)
      CHECK(b.scalers.unscale_y(b.scalers.scale_y(raw.y[i])) ==
            doctest::Approx(raw.y[i]).epsilon(1e-12));
  }

  SUBCASE("x standardization uses train statistics only (population variance)") {
    double mean = 0.0, var = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < b.rows(); ++i)
      if (b.split[i] == Split::kTrain) {
        mean += raw.x[i];
        ++n;
      }
    mean /= static_cast<double>(n);
    for (size_t i = 0; i < b.rows(); ++i)
      if (b.split[i] == Split::kTrain) var += (raw.x[i] - mean) * (raw.x[i] - mean);
    var /= static_cast<double>(n);
    CHECK(b.scalers.x_mean[0] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(b.scalers.x_std[0] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  }

  SUBCASE("test membership is seed-independent; other splits reshuffle") {
    const DatasetBundle b1 = preprocess(raw, 1);
    bool same_rest = true;
    for (size_t i = 0; i < b.rows(); ++i) {
      CHECK((b.split[i] == Split::kTest) == (b1.split[i] == Split::kTest));
      if (b.split[i] != b1.split[i]) same_rest = false;
    }
    CHECK(!same_rest);
    const DatasetBundle b2 = preprocess(raw, 0);
    CHECK(b.split == b2.split);
  }

  SUBCASE("constant feature column scales to zeros") {
    RawDataset flat;
    flat.dim = 1;
    flat.feature_names = {"a"};
    flat.target_name = "y";
    for (size_t i = 0; i < 100; ++i) {
      flat.x.push_back(7.0);
      flat.y.push_back(static_cast<double>(i));
    }
    const DatasetBundle fb = preprocess(flat, 0);
    for (double v : fb.x_scaled) CHECK(v == 0.0);
  }

  SUBCASE("too-small dataset rejected") {
    RawDataset tiny = synthetic_bimodal(5, 0);
    CHECK_THROWS_AS(preprocess(tiny, 0), ConfigError);
  }
}

TEST_CASE("discretize_targets") {
  const std::vector<double> y{0.0, 1.0, 0.35, -0.2, 1.7};
  const std::vector<int> bins = discretize_targets(y, 10, 0.0, 1.0);
  CHECK(bins[0] == 0);
  CHECK(bins[1] == 9);  // max clamps into the last bin
  CHECK(bins[2] == 3);
  CHECK(bins[3] == 0);  // below range clamps up
  CHECK(bins[4] == 9);  // above range clamps down
  CHECK_THROWS_AS(discretize_targets(y, 1, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(discretize_targets(y, 10, 1.0, 1.0), ConfigError);
}
