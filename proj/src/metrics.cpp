#include "spice/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spice/data.hpp"
#include "spice/format.hpp"

namespace spice::metrics {

double marginal_coverage(const std::vector<conformal::PredictionSet>& sets,
                         std::span<const double> truths) {
  if (sets.size() != truths.size())
    throw ConfigError("marginal_coverage: sets/truths length mismatch");
  if (sets.empty()) throw ConfigError("marginal_coverage: empty input");
  size_t covered = 0;
  for (size_t i = 0; i < sets.size(); ++i)
    if (sets[i].contains_raw(truths[i])) ++covered;
  return static_cast<double>(covered) / static_cast<double>(sets.size());
}

double normalization_constant(std::span<const double> train_y, std::span<const double> cal_y,
                              double alpha, int bins) {
  if (train_y.empty() || cal_y.empty())
    throw ConfigError("normalization_constant: empty split");
  const auto [mn_it, mx_it] = std::minmax_element(train_y.begin(), train_y.end());
  const double y_min = *mn_it, y_max = *mx_it;
  if (!(y_max > y_min)) throw ConfigError("normalization_constant: degenerate target range");

  const std::vector<int> train_bins = data::discretize_targets(train_y, bins, y_min, y_max);
  std::vector<double> prob(static_cast<size_t>(bins), 0.0);
  for (int b : train_bins) prob[static_cast<size_t>(b)] += 1.0;
  for (double& p : prob) p /= static_cast<double>(train_y.size());

  const std::vector<int> cal_bins = data::discretize_targets(cal_y, bins, y_min, y_max);
  std::vector<double> scores;
  scores.reserve(cal_y.size());
  for (int b : cal_bins) scores.push_back(-prob[static_cast<size_t>(b)]);
  const conformal::CalibrationResult cal =
      conformal::calibrate(std::move(scores), alpha, conformal::ScoreKind::kHist);

  const double bin_width = (y_max - y_min) / static_cast<double>(bins);
  if (std::isinf(cal.q_hat)) return y_max - y_min;
  // Weak inequality: q_hat is itself -(probability of some bin), and that
  // boundary bin must stay in the kept set (a flat histogram would otherwise
  // keep nothing).
  double width = 0.0;
  for (double p : prob)
    if (p >= -cal.q_hat) width += bin_width;
  return width;
}

std::array<double, kLabelBuckets> label_conditional_coverage(
    const std::vector<conformal::PredictionSet>& sets, std::span<const double> truths,
    double* worst) {
  if (sets.size() != truths.size())
    throw ConfigError("label_conditional_coverage: sets/truths length mismatch");
  if (truths.size() < kLabelBuckets)
    throw ConfigError("label_conditional_coverage: need at least 5 samples");
  const auto [mn_it, mx_it] = std::minmax_element(truths.begin(), truths.end());
  const double y_min = *mn_it, y_max = *mx_it;

  std::array<size_t, kLabelBuckets> total{};
  std::array<size_t, kLabelBuckets> covered{};
  for (size_t i = 0; i < truths.size(); ++i) {
    size_t b = 0;
    if (y_max > y_min) {
      const double frac = (truths[i] - y_min) / (y_max - y_min);
      b = std::min(static_cast<size_t>(frac * static_cast<double>(kLabelBuckets)),
                   kLabelBuckets - 1);
    }
    ++total[b];
    if (sets[i].contains_raw(truths[i])) ++covered[b];
  }

  std::array<double, kLabelBuckets> out{};
  double mn = std::numeric_limits<double>::infinity();
  for (size_t b = 0; b < kLabelBuckets; ++b) {
    if (total[b] == 0) {
      out[b] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out[b] = static_cast<double>(covered[b]) / static_cast<double>(total[b]);
    mn = std::min(mn, out[b]);
  }
  if (worst) *worst = mn;
  return out;
}

EvalReport evaluate(const std::vector<conformal::PredictionSet>& sets,
                    std::span<const double> truths, double alpha, double norm_constant) {
  if (!(norm_constant > 0.0)) throw ConfigError("evaluate: normalization constant must be > 0");
  EvalReport r;
  r.alpha = alpha;
  r.count = sets.size();
  r.coverage = marginal_coverage(sets, truths);
  double total = 0.0;
  for (const auto& s : sets) total += s.raw_size;
  r.mean_size = total / static_cast<double>(sets.size());
  r.norm_constant = norm_constant;
  r.mean_normalized_size = r.mean_size / norm_constant;
  r.bucket_coverage = label_conditional_coverage(sets, truths, &r.worst_bucket);
  return r;
}

std::string report_json(const EvalReport& r) {
  std::string out = "{";
  out += "\"alpha\":" + fmt17(r.alpha);
  out += ",\"coverage\":" + fmt17(r.coverage);
  out += ",\"mean_size\":" + fmt17(r.mean_size);
  out += ",\"norm_constant\":" + fmt17(r.norm_constant);
  out += ",\"mean_normalized_size\":" + fmt17(r.mean_normalized_size);
  out += ",\"bucket_coverage\":[";
  for (size_t b = 0; b < kLabelBuckets; ++b) {
    if (b) out += ",";
    out += std::isnan(r.bucket_coverage[b]) ? "null" : fmt17(r.bucket_coverage[b]);
  }
  out += "],\"worst_bucket\":" + fmt17(r.worst_bucket);
  out += ",\"count\":" + std::to_string(r.count);
  out += "}";
  return out;
}

std::string report_csv_header() {
  std::string h = "alpha,coverage,mean_size,norm_constant,mean_normalized_size";
  for (size_t b = 0; b < kLabelBuckets; ++b) h += ",bucket" + std::to_string(b);
  h += ",worst_bucket,count";
  return h;
}

std::string report_csv_row(const EvalReport& r) {
  std::string row = fmt17(r.alpha) + "," + fmt17(r.coverage) + "," + fmt17(r.mean_size) +
                    "," + fmt17(r.norm_constant) + "," + fmt17(r.mean_normalized_size);
  for (size_t b = 0; b < kLabelBuckets; ++b)
    row += "," + (std::isnan(r.bucket_coverage[b]) ? std::string("")
                                                   : fmt17(r.bucket_coverage[b]));
  row += "," + fmt17(r.worst_bucket) + "," + std::to_string(r.count);
  return row;
}

}  // namespace spice::metrics
