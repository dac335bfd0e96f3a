#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spice/data.hpp"
#include "spice/gradcore.hpp"
#include "spice/spline.hpp"

namespace spice::model {

inline constexpr size_t kHiddenWidth = 32;
inline constexpr double kDensityFloor = 1e-12;

struct SplineModelConfig {
  size_t input_dim = 1;
  int degree = 1;       // n in {1, 2}
  size_t knots = 31;    // K >= 2
  double eps = 1e-3;    // minimum knot spacing, must be < 1/K
};

struct HistModelConfig {
  size_t input_dim = 1;
  int bins = 21;
};

// Two-layer GeLU encoder plus linear heads for knot positions (K-1 raw
// widths) and knot heights (K for degree 1, 2K-1 for degree 2).
class SplineModel {
 public:
  SplineModel(SplineModelConfig cfg, uint64_t seed);

  const SplineModelConfig& config() const { return cfg_; }
  grad::ParamStore& params() { return params_; }
  const grad::ParamStore& params() const { return params_; }

  // Inference path over plain doubles.
  spline::SplineDensity forward(std::span<const double> x) const;

  // Differentiable floored mean NLL over a batch. Parameter leaves are pushed
  // onto the tape in tensor order and returned through `leaves` when non-null.
  grad::Var nll_batch(grad::Tape& tape, const std::vector<std::span<const double>>& xs,
                      std::span<const double> ys,
                      std::vector<grad::Var>* leaves = nullptr) const;

  double nll_plain(const std::vector<std::span<const double>>& xs,
                   std::span<const double> ys) const;

 private:
  SplineModelConfig cfg_;
  grad::ParamStore params_;
};

// Same encoder with a B-way classifier head over discretized targets.
class HistModel {
 public:
  HistModel(HistModelConfig cfg, uint64_t seed);

  const HistModelConfig& config() const { return cfg_; }
  grad::ParamStore& params() { return params_; }
  const grad::ParamStore& params() const { return params_; }

  // Evenly spaced over the train-split target range; must be set before use.
  void set_bin_edges(double y_min, double y_max);
  const std::vector<double>& bin_edges() const { return edges_; }
  int bin_of(double y) const;

  std::vector<double> forward(std::span<const double> x) const;

  grad::Var nll_batch(grad::Tape& tape, const std::vector<std::span<const double>>& xs,
                      std::span<const int> bins,
                      std::vector<grad::Var>* leaves = nullptr) const;

  double nll_plain(const std::vector<std::span<const double>>& xs,
                   std::span<const int> bins) const;

 private:
  HistModelConfig cfg_;
  std::vector<double> edges_;
  grad::ParamStore params_;
};

struct TrainConfig {
  double lr = 5e-3;
  double weight_decay = 1e-4;
  size_t batch_size = 512;
  size_t max_batches = 50000;
  size_t patience_passes = 125;
  double clip_norm = 5.0;
  size_t cosine_horizon = 50000;
  uint64_t seed = 0;
};

struct TrainLogEntry {
  size_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  double best_val_loss = 0.0;
  size_t best_step = 0;
  size_t total_steps = 0;
  size_t passes = 0;
  std::vector<TrainLogEntry> log;
};

double cosine_lr(size_t step, size_t total_steps, double lr_max);

// Scales all gradients by max_norm / ||g||_2 when the global norm exceeds it.
// Returns the pre-clip norm.
double clip_gradients(std::vector<std::vector<double>>& grads, double max_norm);

// Decoupled weight decay plus bias-corrected Adam moments
// (beta1 0.9, beta2 0.999, eps 1e-8). `step` is 1-based.
void adamw_step(grad::ParamStore& params, const std::vector<std::vector<double>>& grads,
                double lr_t, double weight_decay, size_t step);

TrainResult train_spline(SplineModel& model, const data::DatasetBundle& data,
                         const TrainConfig& cfg);
TrainResult train_hist(HistModel& model, const data::DatasetBundle& data,
                       const TrainConfig& cfg);

// Self-describing binary checkpoint: JSON header plus raw little-endian
// 64-bit floats; round-trips bit-exactly.
struct Checkpoint {
  std::string kind;  // "spline" or "hist"
  SplineModelConfig spline_cfg;
  HistModelConfig hist_cfg;
  data::Scalers scalers;
  std::vector<double> bin_edges;  // hist only
  double best_val_loss = 0.0;
  uint64_t seed = 0;
  grad::ParamStore params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace spice::model
