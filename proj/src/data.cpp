#include "spice/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spice/rng.hpp"

namespace spice::data {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, size_t row, size_t col) {
  const std::string t = trim(cell);
  double out = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end)
    throw IngestError("load_csv: non-numeric cell '" + cell + "' at data row " +
                      std::to_string(row) + ", column " + std::to_string(col));
  return out;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kCal: return "cal";
    case Split::kCalVal: return "calval";
    case Split::kTest: return "test";
  }
  return "?";
}

RawDataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw IngestError("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IngestError("load_csv: empty file " + path);
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  size_t target_idx = header.size();
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == target_column) target_idx = i;
  if (target_idx == header.size())
    throw IngestError("load_csv: target column '" + target_column + "' not found in " + path);

  RawDataset ds;
  ds.dim = header.size() - 1;
  ds.target_name = target_column;
  for (size_t i = 0; i < header.size(); ++i)
    if (i != target_idx) ds.feature_names.push_back(header[i]);

  size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw IngestError("load_csv: row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    for (size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_cell(cells[c], row, c);
      if (c == target_idx)
        ds.y.push_back(v);
      else
        ds.x.push_back(v);
    }
  }
  if (ds.rows() == 0) throw IngestError("load_csv: no data rows in " + path);
  return ds;
}

RawDataset synthetic_bimodal(size_t count, uint64_t seed) {
  if (count < 2) throw ConfigError("synthetic_bimodal: count must be >= 2");
  RawDataset ds;
  ds.dim = 1;
  ds.feature_names = {"x"};
  ds.target_name = "y";
  ds.x.reserve(count);
  ds.y.reserve(count);
  Rng rng(seed);
  for (size_t i = 0; i < count; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(count - 1);
    const double u = rng.uniform();
    const double sigma = 0.1 + x * u;
    const bool positive = rng.bernoulli();
    ds.x.push_back(x);
    ds.y.push_back(positive ? sigma : -sigma);
  }
  return ds;
}

std::vector<size_t> DatasetBundle::indices(Split s) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

DatasetBundle preprocess(const RawDataset& raw, uint64_t seed, uint64_t test_base_seed) {
  const size_t n = raw.rows();
  if (n < 10) throw ConfigError("preprocess: need at least 10 rows");

  const size_t c1 = n * 5 / 10;
  const size_t c2 = n * 6 / 10;
  const size_t c3 = n * 7 / 10;
  const size_t c4 = n * 8 / 10;
  if (c1 == 0 || c2 == c1 || c3 == c2 || c4 == c3 || c4 == n)
    throw ConfigError("preprocess: dataset too small to populate every split");

  // Test rows are picked by a row-index hash with a base seed independent of
  // the run seed, so the test split is identical across runs.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<uint64_t> h(n);
  for (size_t i = 0; i < n; ++i) h[i] = hash64(static_cast<uint64_t>(i) ^ test_base_seed);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return h[a] != h[b] ? h[a] < h[b] : a < b;
  });

  DatasetBundle bundle;
  bundle.dim = raw.dim;
  bundle.seed = seed;
  bundle.split.assign(n, Split::kTrain);
  for (size_t k = c4; k < n; ++k) bundle.split[order[k]] = Split::kTest;

  std::vector<size_t> rest(order.begin(), order.begin() + static_cast<ptrdiff_t>(c4));
  std::sort(rest.begin(), rest.end());
  Rng rng(seed);
  rng.shuffle(rest);
  for (size_t k = 0; k < rest.size(); ++k) {
    Split s = Split::kTrain;
    if (k >= c3)
      s = Split::kCalVal;
    else if (k >= c2)
      s = Split::kCal;
    else if (k >= c1)
      s = Split::kVal;
    bundle.split[rest[k]] = s;
  }

  // Scaler statistics from the train split only.
  std::vector<size_t> train;
  for (size_t i = 0; i < n; ++i)
    if (bundle.split[i] == Split::kTrain) train.push_back(i);

  bundle.scalers.x_mean.assign(raw.dim, 0.0);
  bundle.scalers.x_std.assign(raw.dim, 1.0);
  for (size_t j = 0; j < raw.dim; ++j) {
    double mean = 0.0;
    for (size_t i : train) mean += raw.x[i * raw.dim + j];
    mean /= static_cast<double>(train.size());
    double var = 0.0;
    for (size_t i : train) {
      const double d = raw.x[i * raw.dim + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(train.size());  // population variance
    bundle.scalers.x_mean[j] = mean;
    bundle.scalers.x_std[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }

  double ymin = raw.y[train[0]], ymax = raw.y[train[0]];
  for (size_t i : train) {
    ymin = std::min(ymin, raw.y[i]);
    ymax = std::max(ymax, raw.y[i]);
  }
  if (!(ymax > ymin)) throw ConfigError("preprocess: constant target on the train split");
  bundle.scalers.y_min = ymin;
  bundle.scalers.y_max = ymax;

  bundle.x_scaled.resize(n * raw.dim);
  bundle.y_raw = raw.y;
  bundle.y_scaled.resize(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < raw.dim; ++j)
      bundle.x_scaled[i * raw.dim + j] =
          (raw.x[i * raw.dim + j] - bundle.scalers.x_mean[j]) / bundle.scalers.x_std[j];
    bundle.y_scaled[i] = bundle.scalers.scale_y(raw.y[i]);
    if (bundle.y_scaled[i] < 0.0 || bundle.y_scaled[i] > 1.0) ++bundle.clamp_events;
  }
  return bundle;
}

std::vector<int> discretize_targets(std::span<const double> y, int bins, double y_min,
                                    double y_max) {
  if (bins < 2) throw ConfigError("discretize_targets: need at least 2 bins");
  if (!(y_max > y_min)) throw ConfigError("discretize_targets: degenerate target range");
  std::vector<int> out;
  out.reserve(y.size());
  const double scale = static_cast<double>(bins) / (y_max - y_min);
  for (double v : y) {
    const int idx = static_cast<int>(std::floor((v - y_min) * scale));
    out.push_back(std::clamp(idx, 0, bins - 1));
  }
  return out;
}

}  // namespace spice::data
