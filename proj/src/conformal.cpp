#include "spice/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "spice/format.hpp"

#include <json.hpp>

namespace spice::conformal {

const char* kind_name(ScoreKind k) {
  switch (k) {
    case ScoreKind::kNd: return "nd";
    case ScoreKind::kHpd: return "hpd";
    case ScoreKind::kHist: return "hist";
  }
  return "?";
}

ScoreKind parse_kind(const std::string& name) {
  if (name == "nd") return ScoreKind::kNd;
  if (name == "hpd") return ScoreKind::kHpd;
  if (name == "hist") return ScoreKind::kHist;
  throw ConfigError("unknown score kind '" + name + "'");
}

double score_nd(const spline::SplineDensity& d, double y) {
  return -spline::density_eval(d, y);
}

double score_hpd(const spline::SplineDensity& d, double y) {
  return -spline::mass_below_level(d, spline::density_eval(d, y));
}

double score_hist(std::span<const double> probs, int bin) {
  if (bin < 0 || static_cast<size_t>(bin) >= probs.size())
    throw ConfigError("score_hist: bin index out of range");
  return -probs[static_cast<size_t>(bin)];
}

CalibrationResult calibrate(std::vector<double> scores, double alpha, ScoreKind kind) {
  if (scores.empty()) throw ConfigError("calibrate: empty score set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("calibrate: alpha must be in (0,1)");
  CalibrationResult cal;
  cal.alpha = alpha;
  cal.n_cal = scores.size();
  cal.kind = kind;
  const double n = static_cast<double>(scores.size());
  const size_t k = static_cast<size_t>(std::ceil((n + 1.0) * (1.0 - alpha)));
  if (k > scores.size()) {
    cal.q_hat = std::numeric_limits<double>::infinity();
    return cal;
  }
  std::nth_element(scores.begin(), scores.begin() + static_cast<ptrdiff_t>(k - 1),
                   scores.end());
  cal.q_hat = scores[k - 1];
  return cal;
}

namespace {

void finish_set(PredictionSet& set, const data::Scalers& scalers) {
  set.raw.clear();
  set.raw_size = 0.0;
  for (const auto& part : set.scaled.parts()) {
    spline::Interval r{scalers.unscale_y(part.lo), scalers.unscale_y(part.hi)};
    set.raw_size += r.size();
    set.raw.push_back(r);
  }
}

spline::IntervalUnion full_domain() {
  return spline::IntervalUnion::from_intervals({{0.0, 1.0}});
}

void require_kind(const CalibrationResult& cal, ScoreKind expected, const char* where) {
  if (cal.kind != expected)
    throw UsageError(std::string(where) + ": calibration was computed for score kind '" +
                     kind_name(cal.kind) + "'");
}

}  // namespace

bool PredictionSet::contains_raw(double y) const {
  for (const auto& part : raw)
    if (y >= part.lo && y <= part.hi) return true;
  return false;
}

PredictionSet predict_set_nd(const spline::SplineDensity& d, const CalibrationResult& cal,
                             const data::Scalers& scalers) {
  require_kind(cal, ScoreKind::kNd, "predict_set_nd");
  PredictionSet set;
  set.kind = ScoreKind::kNd;
  set.scaled = std::isinf(cal.q_hat) ? full_domain() : spline::level_set(d, -cal.q_hat);
  finish_set(set, scalers);
  return set;
}

PredictionSet predict_set_hpd(const spline::SplineDensity& d, const CalibrationResult& cal,
                              const data::Scalers& scalers, int steps) {
  require_kind(cal, ScoreKind::kHpd, "predict_set_hpd");
  if (steps < 1) throw ConfigError("predict_set_hpd: steps must be >= 1");
  PredictionSet set;
  set.kind = ScoreKind::kHpd;
  if (std::isinf(cal.q_hat)) {
    set.scaled = full_domain();
    finish_set(set, scalers);
    return set;
  }
  // Bisect on the density level; keep the bound whose excluded mass stays
  // strictly below -q_hat so the returned set never undershoots the target.
  double lo = 0.0, hi = spline::density_sup(d);
  for (int i = 0; i < steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (spline::mass_below_level(d, mid) < -cal.q_hat)
      lo = mid;
    else
      hi = mid;
  }
  set.scaled = spline::level_set(d, lo);
  finish_set(set, scalers);
  return set;
}

PredictionSet predict_set_hist(std::span<const double> probs, const CalibrationResult& cal,
                               const data::Scalers& scalers) {
  require_kind(cal, ScoreKind::kHist, "predict_set_hist");
  PredictionSet set;
  set.kind = ScoreKind::kHist;
  const size_t b = probs.size();
  std::vector<spline::Interval> parts;
  for (size_t i = 0; i < b; ++i) {
    if (probs[i] > -cal.q_hat) {
      set.bins.push_back(static_cast<int>(i));
      parts.push_back({static_cast<double>(i) / static_cast<double>(b),
                       static_cast<double>(i + 1) / static_cast<double>(b)});
    }
  }
  set.scaled = spline::IntervalUnion::from_intervals(std::move(parts));
  finish_set(set, scalers);
  return set;
}

std::string set_record_json(size_t sample_id, const CalibrationResult& cal,
                            const PredictionSet& set) {
  std::string out = "{\"id\":" + std::to_string(sample_id);
  out += ",\"kind\":\"" + std::string(kind_name(set.kind)) + "\"";
  out += ",\"alpha\":" + fmt17(cal.alpha);
  out += ",\"q_hat\":\"" + fmt17(cal.q_hat) + "\"";
  out += ",\"intervals\":[";
  for (size_t i = 0; i < set.raw.size(); ++i) {
    if (i) out += ",";
    out += "[" + fmt17(set.raw[i].lo) + "," + fmt17(set.raw[i].hi) + "]";
  }
  out += "],\"size\":" + fmt17(set.raw_size) + "}";
  return out;
}

void save_calibration(const std::string& path, const CalibrationResult& cal) {
  nlohmann::json j;
  j["alpha"] = cal.alpha;
  j["q_hat"] = fmt17(cal.q_hat);  // string so +inf survives JSON
  j["n_cal"] = cal.n_cal;
  j["kind"] = kind_name(cal.kind);
  std::ofstream out(path);
  if (!out) throw IngestError("save_calibration: cannot open " + path);
  out << j.dump(2) << "\n";
}

CalibrationResult load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("load_calibration: cannot open " + path);
  nlohmann::json j;
  in >> j;
  CalibrationResult cal;
  cal.alpha = j.at("alpha").get<double>();
  cal.q_hat = parse17(j.at("q_hat").get<std::string>());
  cal.n_cal = j.at("n_cal").get<size_t>();
  cal.kind = parse_kind(j.at("kind").get<std::string>());
  return cal;
}

}  // namespace spice::conformal
