#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "spice/conformal.hpp"

namespace spice::metrics {

inline constexpr int kNormalizationBins = 20;
inline constexpr size_t kLabelBuckets = 5;

struct EvalReport {
  double alpha = 0.1;
  double coverage = 0.0;
  double mean_size = 0.0;             // unscaled y units
  double norm_constant = 1.0;
  double mean_normalized_size = 0.0;
  std::array<double, kLabelBuckets> bucket_coverage{};  // NaN when a bucket is empty
  double worst_bucket = 0.0;          // min over non-empty buckets
  size_t count = 0;
};

double marginal_coverage(const std::vector<conformal::PredictionSet>& sets,
                         std::span<const double> truths);

// Unconditional 20-bin train-target histogram, conformalized on the
// calibration targets with score = -(bin probability); returns the total
// width of the bins kept at level alpha.
double normalization_constant(std::span<const double> train_y, std::span<const double> cal_y,
                              double alpha, int bins = kNormalizationBins);

// Five equal-width buckets over the test target range. Empty buckets report
// NaN and are skipped in the minimum.
std::array<double, kLabelBuckets> label_conditional_coverage(
    const std::vector<conformal::PredictionSet>& sets, std::span<const double> truths,
    double* worst = nullptr);

EvalReport evaluate(const std::vector<conformal::PredictionSet>& sets,
                    std::span<const double> truths, double alpha, double norm_constant);

std::string report_json(const EvalReport& r);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& r);

}  // namespace spice::metrics
