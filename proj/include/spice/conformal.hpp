#pragma once

#include <span>
#include <string>
#include <vector>

#include "spice/data.hpp"
#include "spice/model.hpp"
#include "spice/spline.hpp"

namespace spice::conformal {

enum class ScoreKind { kNd, kHpd, kHist };

const char* kind_name(ScoreKind k);
ScoreKind parse_kind(const std::string& name);

inline constexpr int kDefaultBisectionSteps = 24;

struct CalibrationResult {
  double alpha = 0.1;
  double q_hat = 0.0;  // +inf when the adjusted level exceeds 1
  size_t n_cal = 0;
  ScoreKind kind = ScoreKind::kNd;
};

// Scores over an already-evaluated conditional density / probability vector.
double score_nd(const spline::SplineDensity& d, double y);
double score_hpd(const spline::SplineDensity& d, double y);
double score_hist(std::span<const double> probs, int bin);

// q_hat = k-th smallest score with k = ceil((N+1)(1-alpha)); +inf when k > N.
CalibrationResult calibrate(std::vector<double> scores, double alpha, ScoreKind kind);

// Prediction set in scaled units plus its unscaled mirror. Hist sets also
// keep the contributing bin indices.
struct PredictionSet {
  ScoreKind kind = ScoreKind::kNd;
  spline::IntervalUnion scaled;          // subset of [0, 1]
  std::vector<spline::Interval> raw;     // same components in original y units
  std::vector<int> bins;                 // hist only
  double raw_size = 0.0;

  bool contains_raw(double y) const;
};

PredictionSet predict_set_nd(const spline::SplineDensity& d, const CalibrationResult& cal,
                             const data::Scalers& scalers);
PredictionSet predict_set_hpd(const spline::SplineDensity& d, const CalibrationResult& cal,
                              const data::Scalers& scalers,
                              int steps = kDefaultBisectionSteps);
PredictionSet predict_set_hist(std::span<const double> probs, const CalibrationResult& cal,
                               const data::Scalers& scalers);

// One JSON line per sample: id, kind, alpha, q_hat, unscaled [a,b] pairs, size.
std::string set_record_json(size_t sample_id, const CalibrationResult& cal,
                            const PredictionSet& set);

void save_calibration(const std::string& path, const CalibrationResult& cal);
CalibrationResult load_calibration(const std::string& path);

}  // namespace spice::conformal
