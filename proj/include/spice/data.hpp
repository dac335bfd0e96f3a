#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spice/errors.hpp"

namespace spice::data {

enum class Split : uint8_t { kTrain, kVal, kCal, kCalVal, kTest };

const char* split_name(Split s);

struct RawDataset {
  size_t dim = 0;
  std::vector<double> x;  // row-major, rows() x dim
  std::vector<double> y;
  std::vector<std::string> feature_names;
  std::string target_name;

  size_t rows() const { return y.size(); }
  std::span<const double> row(size_t i) const { return {x.data() + i * dim, dim}; }
};

// Comma-separated file with one header row and all-numeric cells.
RawDataset load_csv(const std::string& path, const std::string& target_column);

// Heteroscedastic bimodal data: x evenly spaced on [0,1], y = +/-(0.1 + x U).
RawDataset synthetic_bimodal(size_t count, uint64_t seed);

struct Scalers {
  std::vector<double> x_mean;
  std::vector<double> x_std;  // population std; 1 for constant columns
  double y_min = 0.0;
  double y_max = 1.0;

  double scale_y(double y) const { return (y - y_min) / (y_max - y_min); }
  double unscale_y(double s) const { return y_min + s * (y_max - y_min); }
};

struct DatasetBundle {
  size_t dim = 0;
  std::vector<double> x_scaled;  // row-major
  std::vector<double> y_raw;
  std::vector<double> y_scaled;  // unclamped; may leave [0,1] outside the train split
  std::vector<Split> split;
  Scalers scalers;
  uint64_t seed = 0;
  size_t clamp_events = 0;  // rows whose scaled target falls outside [0,1]

  size_t rows() const { return y_raw.size(); }
  std::span<const double> row(size_t i) const { return {x_scaled.data() + i * dim, dim}; }
  std::vector<size_t> indices(Split s) const;
};

// Test membership depends only on this base seed so the test split is shared
// across run seeds.
inline constexpr uint64_t kTestSplitBaseSeed = 0x51CE0000DA7AULL;

// 50/10/10/10/20 split, train-statistics-only scaling.
DatasetBundle preprocess(const RawDataset& raw, uint64_t seed,
                         uint64_t test_base_seed = kTestSplitBaseSeed);

// Evenly spaced bins between y_min and y_max; out-of-range values clamp to the
// edge bins.
std::vector<int> discretize_targets(std::span<const double> y, int bins, double y_min,
                                    double y_max);

}  // namespace spice::data
