#include "spice/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "spice/rng.hpp"

#include <json.hpp>

namespace spice::model {

namespace {

using grad::Tape;
using grad::Var;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double softplus_plain(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double gelu_plain(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244)); }

void affine_plain(const grad::Tensor& w, const grad::Tensor& b, std::span<const double> x,
                  std::vector<double>& out) {
  const size_t rows = b.size();
  const size_t cols = x.size();
  out.resize(rows);
  for (size_t i = 0; i < rows; ++i) {
    double s = b.data[i];
    const double* wr = w.data.data() + i * cols;
    for (size_t j = 0; j < cols; ++j) s += wr[j] * x[j];
    out[i] = s;
  }
}

void init_linear(grad::Tensor& w, Rng& rng, size_t fan_in, double scale = 1.0) {
  const double limit = scale * std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w.data) v = rng.uniform(-limit, limit);
}

// Encoder shared by both model kinds: two GeLU layers of width 32.
void add_encoder_tensors(grad::ParamStore& p, size_t input_dim) {
  p.add("enc1_w", {kHiddenWidth, static_cast<uint32_t>(input_dim)});
  p.add("enc1_b", {kHiddenWidth});
  p.add("enc2_w", {kHiddenWidth, kHiddenWidth});
  p.add("enc2_b", {kHiddenWidth});
}

void init_encoder(grad::ParamStore& p, Rng& rng, size_t input_dim) {
  init_linear(p.at("enc1_w"), rng, input_dim);
  init_linear(p.at("enc2_w"), rng, kHiddenWidth);
}

std::vector<double> encode_plain(const grad::ParamStore& p, std::span<const double> x) {
  std::vector<double> h;
  affine_plain(p.at("enc1_w"), p.at("enc1_b"), x, h);
  for (double& v : h) v = gelu_plain(v);
  std::vector<double> z;
  affine_plain(p.at("enc2_w"), p.at("enc2_b"), h, z);
  for (double& v : z) v = gelu_plain(v);
  return z;
}

// Leaves pushed in tensor order so the trainer can map gradients back.
std::vector<Var> push_leaves(Tape& tape, const grad::ParamStore& p) {
  std::vector<Var> leaves;
  leaves.reserve(p.tensors().size());
  for (const auto& t : p.tensors()) leaves.push_back(tape.leaf(t.data));
  return leaves;
}

struct EncoderVars {
  Var w1, b1, w2, b2;
};

Var encode_tape(Tape& tape, const EncoderVars& e, Var x, size_t input_dim) {
  Var h = tape.gelu(tape.affine(e.w1, e.b1, x, kHiddenWidth, static_cast<uint32_t>(input_dim)));
  return tape.gelu(tape.affine(e.w2, e.b2, h, kHiddenWidth, kHiddenWidth));
}

// Antiderivative of a y^2 + b y + c as tape ops, matching
// spline::segment_mass's ((a/3 y + b/2) y + c) y form.
Var poly_antideriv(Tape& t, Var a3, Var b2, Var c, Var y) {
  return t.mul(t.add(t.mul(t.add(t.mul(a3, y), b2), y), c), y);
}

}  // namespace

SplineModel::SplineModel(SplineModelConfig cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg_.degree != 1 && cfg_.degree != 2)
    throw ConfigError("SplineModel: degree must be 1 or 2");
  if (cfg_.knots < 2) throw ConfigError("SplineModel: need at least 2 knots");
  if (!(cfg_.eps > 0.0 && cfg_.eps < 1.0 / static_cast<double>(cfg_.knots)))
    throw ConfigError("SplineModel: eps must satisfy 0 < eps < 1/K");
  if (cfg_.input_dim == 0) throw ConfigError("SplineModel: input_dim must be positive");

  const uint32_t k = static_cast<uint32_t>(cfg_.knots);
  const uint32_t n_heights = cfg_.degree == 1 ? k : 2 * k - 1;
  add_encoder_tensors(params_, cfg_.input_dim);
  params_.add("pos_w", {k - 1, kHiddenWidth});
  params_.add("pos_b", {k - 1});
  params_.add("h_w", {n_heights, kHiddenWidth});
  params_.add("h_b", {n_heights});

  Rng rng(seed);
  init_encoder(params_, rng, cfg_.input_dim);
  init_linear(params_.at("pos_w"), rng, kHiddenWidth);
  init_linear(params_.at("h_w"), rng, kHiddenWidth);
  if (cfg_.degree == 2) {
    // Midpoint-height rows start small so early densities stay close to the
    // linear interpolants and avoid truncation-induced zero regions.
    auto& hw = params_.at("h_w").data;
    for (size_t i = static_cast<size_t>(k) * kHiddenWidth; i < hw.size(); ++i) hw[i] *= 1e-2;
  }
}

spline::SplineDensity SplineModel::forward(std::span<const double> x) const {
  if (x.size() != cfg_.input_dim)
    throw ConfigError("SplineModel::forward: input dimension mismatch");
  const std::vector<double> z = encode_plain(params_, x);

  std::vector<double> raw_widths;
  affine_plain(params_.at("pos_w"), params_.at("pos_b"), z, raw_widths);
  const std::vector<double> positions = spline::knot_positions(raw_widths, cfg_.knots, cfg_.eps);

  std::vector<double> raw_heights;
  affine_plain(params_.at("h_w"), params_.at("h_b"), z, raw_heights);
  for (double v : raw_heights)
    if (!std::isfinite(v))
      throw NumericalError("SplineModel::forward: non-finite activation in height head");

  std::vector<double> endpoint(cfg_.knots);
  for (size_t i = 0; i < cfg_.knots; ++i) endpoint[i] = softplus_plain(raw_heights[i]);
  std::vector<double> midpoint;
  if (cfg_.degree == 2)
    midpoint.assign(raw_heights.begin() + static_cast<ptrdiff_t>(cfg_.knots),
                    raw_heights.end());
  return spline::build_density(positions, endpoint, midpoint, cfg_.degree);
}

grad::Var SplineModel::nll_batch(Tape& tape, const std::vector<std::span<const double>>& xs,
                                 std::span<const double> ys,
                                 std::vector<Var>* leaves_out) const {
  if (xs.size() != ys.size() || xs.empty())
    throw ConfigError("SplineModel::nll_batch: batch shape mismatch");
  const size_t k = cfg_.knots;
  const double eps = cfg_.eps;

  std::vector<Var> leaves = push_leaves(tape, params_);
  if (leaves_out) *leaves_out = leaves;
  EncoderVars enc{leaves[0], leaves[1], leaves[2], leaves[3]};
  Var pos_w = leaves[4], pos_b = leaves[5], h_w = leaves[6], h_b = leaves[7];
  const uint32_t n_heights = cfg_.degree == 1 ? static_cast<uint32_t>(k)
                                              : static_cast<uint32_t>(2 * k - 1);

  Var zero = tape.leaf(0.0);
  Var loss_sum = tape.leaf(0.0);
  std::vector<Var> pos(k), he(k), hm, seg_a, seg_b, seg_c;
  std::vector<double> pos_vals(k);

  for (size_t s = 0; s < xs.size(); ++s) {
    const double y = ys[s];
    if (y < 0.0 || y > 1.0) throw DomainError("nll_batch: target outside [0, 1]");
    Var x = tape.leaf(xs[s]);
    Var z = encode_tape(tape, enc, x, cfg_.input_dim);

    // Knot positions: softmax widths squeezed by eps, cumulative sum.
    Var raw = tape.affine(pos_w, pos_b, z, static_cast<uint32_t>(k - 1), kHiddenWidth);
    Var widths = tape.axpb(tape.softmax(raw), 1.0 - eps * static_cast<double>(k), eps);
    Var cum = tape.cumsum(widths);
    pos[0] = zero;
    for (size_t i = 1; i + 1 < k; ++i) pos[i] = tape.index(cum, static_cast<uint32_t>(i - 1));
    pos[k - 1] = tape.axpb(tape.index(cum, static_cast<uint32_t>(k - 2)), 1.0, eps);
    for (size_t i = 0; i < k; ++i) pos_vals[i] = tape.val(pos[i]);

    Var hraw = tape.affine(h_w, h_b, z, n_heights, kHiddenWidth);
    Var hend = tape.softplus(tape.slice(hraw, 0, static_cast<uint32_t>(k)));
    for (size_t i = 0; i < k; ++i) he[i] = tape.index(hend, static_cast<uint32_t>(i));
    if (cfg_.degree == 2) {
      hm.resize(k - 1);
      for (size_t i = 0; i + 1 < k; ++i)
        hm[i] = tape.index(hraw, static_cast<uint32_t>(k + i));
      seg_a.assign(k - 1, Var{});
      seg_b.assign(k - 1, Var{});
      seg_c.assign(k - 1, Var{});
    }

    // Normalizing constant.
    Var zsum = zero;
    for (size_t i = 0; i + 1 < k; ++i) {
      Var t0 = pos[i], t1 = pos[i + 1];
      Var mass;
      if (cfg_.degree == 1) {
        mass = tape.axpb(tape.mul(tape.sub(t1, t0), tape.add(he[i], he[i + 1])), 0.5, 0.0);
      } else {
        Var mid = tape.axpb(tape.add(t0, t1), 0.5, 0.0);
        Var l0 = tape.mul(tape.sub(t0, mid), tape.sub(t0, t1));
        Var l1 = tape.mul(tape.sub(mid, t0), tape.sub(mid, t1));
        Var l2 = tape.mul(tape.sub(t1, t0), tape.sub(t1, mid));
        Var w0 = tape.div(he[i], l0);
        Var w1 = tape.div(hm[i], l1);
        Var w2 = tape.div(he[i + 1], l2);
        Var a = tape.add(tape.add(w0, w1), w2);
        Var b = tape.neg(tape.add(tape.add(tape.mul(w0, tape.add(mid, t1)),
                                           tape.mul(w1, tape.add(t0, t1))),
                                  tape.mul(w2, tape.add(t0, mid))));
        Var c = tape.add(tape.add(tape.mul(w0, tape.mul(mid, t1)),
                                  tape.mul(w1, tape.mul(t0, t1))),
                         tape.mul(w2, tape.mul(t0, mid)));
        seg_a[i] = a;
        seg_b[i] = b;
        seg_c[i] = c;

        Var a3 = tape.axpb(a, 1.0 / 3.0, 0.0);
        Var b2 = tape.axpb(b, 0.5, 0.0);
        Var full = tape.sub(poly_antideriv(tape, a3, b2, c, t1),
                            poly_antideriv(tape, a3, b2, c, t0));
        const double av = tape.val(a), bv = tape.val(b), cv = tape.val(c);
        const double lo_v = pos_vals[i], hi_v = pos_vals[i + 1];

        // Clipped roots act as stop-points: outside the segment the bound is
        // the knot itself and carries no root gradient.
        auto clip = [&](Var r) -> Var {
          const double rv = tape.val(r);
          if (rv <= lo_v) return t0;
          if (rv >= hi_v) return t1;
          return r;
        };

        Var negative = zero;
        if (std::abs(av) < spline::kLinearCoefFloor) {
          if (std::abs(bv) < spline::kLinearCoefFloor) {
            mass = cv > 0.0 ? tape.relu(full) : zero;
            zsum = tape.add(zsum, mass);
            continue;
          }
          Var r = clip(tape.div(tape.neg(c), b));
          if (bv > 0.0) {
            if (tape.val(r) > lo_v)
              negative = tape.sub(poly_antideriv(tape, a3, b2, c, r),
                                  poly_antideriv(tape, a3, b2, c, t0));
          } else {
            if (tape.val(r) < hi_v)
              negative = tape.sub(poly_antideriv(tape, a3, b2, c, t1),
                                  poly_antideriv(tape, a3, b2, c, r));
          }
        } else {
          const double disc_v = bv * bv - 4.0 * av * cv;
          if (disc_v < spline::kDiscriminantFloor) {
            mass = av > 0.0 ? tape.relu(full) : zero;
            zsum = tape.add(zsum, mass);
            continue;
          }
          Var disc = tape.sub(tape.mul(b, b), tape.axpb(tape.mul(a, c), 4.0, 0.0));
          Var sq = tape.sqrt(disc);
          Var q = tape.axpb(tape.add(b, bv >= 0 ? sq : tape.neg(sq)), -0.5, 0.0);
          Var r1, r2;
          if (tape.val(q) != 0.0) {
            r1 = tape.div(q, a);
            r2 = tape.div(c, q);
          } else {
            r1 = tape.div(tape.neg(sq), tape.axpb(a, 2.0, 0.0));
            r2 = tape.neg(r1);
          }
          if (tape.val(r1) > tape.val(r2)) std::swap(r1, r2);
          if (av > 0.0) {
            Var nlo = clip(r1), nhi = clip(r2);
            if (tape.val(nhi) > tape.val(nlo))
              negative = tape.sub(poly_antideriv(tape, a3, b2, c, nhi),
                                  poly_antideriv(tape, a3, b2, c, nlo));
          } else {
            Var nhi = clip(r1);
            if (tape.val(nhi) > lo_v)
              negative = tape.sub(poly_antideriv(tape, a3, b2, c, nhi),
                                  poly_antideriv(tape, a3, b2, c, t0));
            Var nlo = clip(r2);
            if (tape.val(nlo) < hi_v)
              negative = tape.add(negative,
                                  tape.sub(poly_antideriv(tape, a3, b2, c, t1),
                                           poly_antideriv(tape, a3, b2, c, nlo)));
          }
        }
        mass = tape.relu(tape.sub(full, negative));
      }
      zsum = tape.add(zsum, mass);
    }
    const double z_val = tape.val(zsum);
    if (!(z_val > 1e-30))
      throw NumericalError("nll_batch: degenerate density (normalizer underflow)");
    if (!std::isfinite(z_val))
      throw NumericalError("nll_batch: non-finite normalizer");

    // Density at the observed target.
    auto it = std::upper_bound(pos_vals.begin(), pos_vals.end(), y);
    size_t seg = it == pos_vals.begin() ? 0 : static_cast<size_t>(it - pos_vals.begin()) - 1;
    seg = std::min(seg, k - 2);
    Var yv = tape.leaf(y);
    Var p;
    if (cfg_.degree == 1) {
      Var slope = tape.div(tape.sub(he[seg + 1], he[seg]), tape.sub(pos[seg + 1], pos[seg]));
      p = tape.add(he[seg], tape.mul(slope, tape.sub(yv, pos[seg])));
    } else {
      p = tape.add(tape.mul(tape.add(tape.mul(seg_a[seg], yv), seg_b[seg]), yv), seg_c[seg]);
    }
    Var dens = tape.div(tape.relu(p), zsum);
    Var term = tape.val(dens) < kDensityFloor ? tape.leaf(-std::log(kDensityFloor))
                                              : tape.neg(tape.log(dens));
    loss_sum = tape.add(loss_sum, term);
  }
  return tape.axpb(loss_sum, 1.0 / static_cast<double>(xs.size()), 0.0);
}

double SplineModel::nll_plain(const std::vector<std::span<const double>>& xs,
                              std::span<const double> ys) const {
  double total = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const spline::SplineDensity d = forward(xs[i]);
    total += -std::log(std::max(spline::density_eval(d, ys[i]), kDensityFloor));
  }
  return total / static_cast<double>(xs.size());
}

HistModel::HistModel(HistModelConfig cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg_.bins < 2) throw ConfigError("HistModel: need at least 2 bins");
  if (cfg_.input_dim == 0) throw ConfigError("HistModel: input_dim must be positive");
  add_encoder_tensors(params_, cfg_.input_dim);
  params_.add("cls_w", {static_cast<uint32_t>(cfg_.bins), kHiddenWidth});
  params_.add("cls_b", {static_cast<uint32_t>(cfg_.bins)});
  Rng rng(seed);
  init_encoder(params_, rng, cfg_.input_dim);
  init_linear(params_.at("cls_w"), rng, kHiddenWidth);
}

void HistModel::set_bin_edges(double y_min, double y_max) {
  if (!(y_max > y_min)) throw ConfigError("HistModel: degenerate target range");
  edges_.resize(static_cast<size_t>(cfg_.bins) + 1);
  for (size_t i = 0; i < edges_.size(); ++i)
    edges_[i] = y_min + (y_max - y_min) * static_cast<double>(i) /
                            static_cast<double>(cfg_.bins);
}

int HistModel::bin_of(double y) const {
  if (edges_.empty()) throw ConfigError("HistModel: bin edges not set");
  const double y_min = edges_.front(), y_max = edges_.back();
  const int idx = static_cast<int>(
      std::floor((y - y_min) * static_cast<double>(cfg_.bins) / (y_max - y_min)));
  return std::clamp(idx, 0, cfg_.bins - 1);
}

std::vector<double> HistModel::forward(std::span<const double> x) const {
  if (x.size() != cfg_.input_dim)
    throw ConfigError("HistModel::forward: input dimension mismatch");
  const std::vector<double> z = encode_plain(params_, x);
  std::vector<double> logits;
  affine_plain(params_.at("cls_w"), params_.at("cls_b"), z, logits);
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return logits;
}

grad::Var HistModel::nll_batch(Tape& tape, const std::vector<std::span<const double>>& xs,
                               std::span<const int> bins, std::vector<Var>* leaves_out) const {
  if (xs.size() != bins.size() || xs.empty())
    throw ConfigError("HistModel::nll_batch: batch shape mismatch");
  std::vector<Var> leaves = push_leaves(tape, params_);
  if (leaves_out) *leaves_out = leaves;
  EncoderVars enc{leaves[0], leaves[1], leaves[2], leaves[3]};
  Var cls_w = leaves[4], cls_b = leaves[5];

  Var loss_sum = tape.leaf(0.0);
  for (size_t s = 0; s < xs.size(); ++s) {
    Var x = tape.leaf(xs[s]);
    Var z = encode_tape(tape, enc, x, cfg_.input_dim);
    Var probs = tape.softmax(
        tape.affine(cls_w, cls_b, z, static_cast<uint32_t>(cfg_.bins), kHiddenWidth));
    Var p = tape.index(probs, static_cast<uint32_t>(bins[s]));
    Var term = tape.val(p) < kDensityFloor ? tape.leaf(-std::log(kDensityFloor))
                                           : tape.neg(tape.log(p));
    loss_sum = tape.add(loss_sum, term);
  }
  return tape.axpb(loss_sum, 1.0 / static_cast<double>(xs.size()), 0.0);
}

double HistModel::nll_plain(const std::vector<std::span<const double>>& xs,
                            std::span<const int> bins) const {
  double total = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const std::vector<double> probs = forward(xs[i]);
    total += -std::log(std::max(probs[static_cast<size_t>(bins[i])], kDensityFloor));
  }
  return total / static_cast<double>(xs.size());
}

double cosine_lr(size_t step, size_t total_steps, double lr_max) {
  if (step > total_steps) step = total_steps;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_max * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

double clip_gradients(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm))
    throw NumericalError("clip_gradients: non-finite gradient norm");
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g) v *= scale;
  }
  return norm;
}

void adamw_step(grad::ParamStore& params, const std::vector<std::vector<double>>& grads,
                double lr_t, double weight_decay, size_t step) {
  if (grads.size() != params.tensors().size())
    throw ConfigError("adamw_step: gradient/tensor count mismatch");
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
  for (size_t t = 0; t < grads.size(); ++t) {
    grad::Tensor& tensor = params.tensors()[t];
    const auto& g = grads[t];
    if (g.size() != tensor.size()) throw ConfigError("adamw_step: gradient shape mismatch");
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw NumericalError("adamw_step: non-finite gradient in " + tensor.name);
      tensor.data[i] -= lr_t * weight_decay * tensor.data[i];
      tensor.m[i] = kAdamBeta1 * tensor.m[i] + (1.0 - kAdamBeta1) * g[i];
      tensor.v[i] = kAdamBeta2 * tensor.v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double mhat = tensor.m[i] / bc1;
      const double vhat = tensor.v[i] / bc2;
      tensor.data[i] -= lr_t * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
}

namespace {

struct SnapshotState {
  std::vector<std::vector<double>> data;
};

SnapshotState snapshot(const grad::ParamStore& p) {
  SnapshotState s;
  for (const auto& t : p.tensors()) s.data.push_back(t.data);
  return s;
}

void restore(grad::ParamStore& p, const SnapshotState& s) {
  for (size_t i = 0; i < s.data.size(); ++i) p.tensors()[i].data = s.data[i];
}

template <typename BatchGradFn, typename ValLossFn>
TrainResult run_training(grad::ParamStore& params, const TrainConfig& cfg,
                         std::vector<size_t> train_idx, BatchGradFn&& batch_grad,
                         ValLossFn&& val_loss_fn) {
  if (train_idx.empty()) throw ConfigError("train: empty train split");
  const size_t n_train = train_idx.size();
  const size_t batches_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const size_t cadence = std::min<size_t>(100, batches_per_epoch);

  Rng shuffle_rng(cfg.seed ^ 0x5AFF1EULL);
  shuffle_rng.shuffle(train_idx);

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  SnapshotState best = snapshot(params);
  size_t pass_of_best = 0;
  size_t cursor = 0;
  size_t bad_streak = 0;
  std::vector<std::vector<double>> grads;

  size_t step = 0;
  for (; step < cfg.max_batches; ++step) {
    if (cursor >= n_train) {
      cursor = 0;
      shuffle_rng.shuffle(train_idx);
    }
    const size_t take = std::min(cfg.batch_size, n_train - cursor);
    std::span<const size_t> batch(train_idx.data() + cursor, take);
    cursor += take;

    double loss = std::numeric_limits<double>::quiet_NaN();
    bool ok = true;
    try {
      loss = batch_grad(batch, grads);
      if (!std::isfinite(loss)) ok = false;
    } catch (const NumericalError&) {
      ok = false;
    }
    if (!ok) {
      if (++bad_streak >= batches_per_epoch)
        throw NumericalError("train: NLL non-finite for a full epoch");
      continue;
    }
    bad_streak = 0;

    clip_gradients(grads, cfg.clip_norm);
    const double lr_t = cosine_lr(step, cfg.cosine_horizon, cfg.lr);
    adamw_step(params, grads, lr_t, cfg.weight_decay, step + 1);

    if ((step + 1) % cadence == 0) {
      const double val_loss = val_loss_fn();
      result.log.push_back({step + 1, loss, val_loss, lr_t});
      if (val_loss < result.best_val_loss) {
        result.best_val_loss = val_loss;
        result.best_step = step + 1;
        best = snapshot(params);
        pass_of_best = step / batches_per_epoch;
      }
      const size_t completed_passes = (step + 1) / batches_per_epoch;
      if (completed_passes >= pass_of_best + cfg.patience_passes) {
        ++step;
        break;
      }
    }
  }
  restore(params, best);
  result.total_steps = step;
  result.passes = step / batches_per_epoch;
  if (!std::isfinite(result.best_val_loss)) result.best_val_loss = val_loss_fn();
  return result;
}

std::vector<size_t> val_subset(const data::DatasetBundle& bundle, size_t batch_size) {
  std::vector<size_t> val = bundle.indices(data::Split::kVal);
  const size_t cap = 10 * batch_size;  // 10 batches or the full validation set
  if (val.size() > cap) val.resize(cap);
  return val;
}

}  // namespace

TrainResult train_spline(SplineModel& model, const data::DatasetBundle& bundle,
                         const TrainConfig& cfg) {
  const std::vector<size_t> train = bundle.indices(data::Split::kTrain);
  const std::vector<size_t> val = val_subset(bundle, cfg.batch_size);
  if (train.empty() || val.empty())
    throw ConfigError("train_spline: train and validation splits must be nonempty");

  std::vector<double> y_clamped(bundle.rows());
  for (size_t i = 0; i < bundle.rows(); ++i)
    y_clamped[i] = std::clamp(bundle.y_scaled[i], 0.0, 1.0);

  std::vector<std::span<const double>> val_x;
  std::vector<double> val_y;
  for (size_t i : val) {
    val_x.push_back(bundle.row(i));
    val_y.push_back(y_clamped[i]);
  }

  grad::Tape tape;
  auto batch_grad = [&](std::span<const size_t> batch,
                        std::vector<std::vector<double>>& grads) {
    tape.reset();
    std::vector<std::span<const double>> xs;
    std::vector<double> ys;
    xs.reserve(batch.size());
    ys.reserve(batch.size());
    for (size_t i : batch) {
      xs.push_back(bundle.row(i));
      ys.push_back(y_clamped[i]);
    }
    std::vector<grad::Var> leaves;
    grad::Var root = model.nll_batch(tape, xs, ys, &leaves);
    const double loss = tape.val(root);
    if (!std::isfinite(loss)) return loss;
    tape.backward(root);
    grads.resize(leaves.size());
    for (size_t t = 0; t < leaves.size(); ++t) {
      auto g = tape.grad(leaves[t]);
      grads[t].assign(g.begin(), g.end());
    }
    return loss;
  };
  auto val_loss = [&]() { return model.nll_plain(val_x, val_y); };
  return run_training(model.params(), cfg, train, batch_grad, val_loss);
}

TrainResult train_hist(HistModel& model, const data::DatasetBundle& bundle,
                       const TrainConfig& cfg) {
  const std::vector<size_t> train = bundle.indices(data::Split::kTrain);
  const std::vector<size_t> val = val_subset(bundle, cfg.batch_size);
  if (train.empty() || val.empty())
    throw ConfigError("train_hist: train and validation splits must be nonempty");

  model.set_bin_edges(bundle.scalers.y_min, bundle.scalers.y_max);
  std::vector<int> bins(bundle.rows());
  for (size_t i = 0; i < bundle.rows(); ++i) bins[i] = model.bin_of(bundle.y_raw[i]);

  std::vector<std::span<const double>> val_x;
  std::vector<int> val_bins;
  for (size_t i : val) {
    val_x.push_back(bundle.row(i));
    val_bins.push_back(bins[i]);
  }

  grad::Tape tape;
  auto batch_grad = [&](std::span<const size_t> batch,
                        std::vector<std::vector<double>>& grads) {
    tape.reset();
    std::vector<std::span<const double>> xs;
    std::vector<int> bs;
    for (size_t i : batch) {
      xs.push_back(bundle.row(i));
      bs.push_back(bins[i]);
    }
    std::vector<grad::Var> leaves;
    grad::Var root = model.nll_batch(tape, xs, bs, &leaves);
    const double loss = tape.val(root);
    if (!std::isfinite(loss)) return loss;
    tape.backward(root);
    grads.resize(leaves.size());
    for (size_t t = 0; t < leaves.size(); ++t) {
      auto g = tape.grad(leaves[t]);
      grads[t].assign(g.begin(), g.end());
    }
    return loss;
  };
  auto val_loss = [&]() { return model.nll_plain(val_x, val_bins); };
  return run_training(model.params(), cfg, train, batch_grad, val_loss);
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'P', 'C', 'K', 'P', 'T', '0', '1'};

void write_doubles(std::ofstream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& v, size_t count) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw IngestError("load_checkpoint: truncated payload");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["kind"] = ckpt.kind;
  header["spline"] = {{"input_dim", ckpt.spline_cfg.input_dim},
                      {"degree", ckpt.spline_cfg.degree},
                      {"knots", ckpt.spline_cfg.knots},
                      {"eps", ckpt.spline_cfg.eps}};
  header["hist"] = {{"input_dim", ckpt.hist_cfg.input_dim}, {"bins", ckpt.hist_cfg.bins}};
  header["y_min"] = ckpt.scalers.y_min;
  header["y_max"] = ckpt.scalers.y_max;
  header["x_dim"] = ckpt.scalers.x_mean.size();
  header["bin_edge_count"] = ckpt.bin_edges.size();
  header["best_val_loss"] = ckpt.best_val_loss;
  header["seed"] = ckpt.seed;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : ckpt.params.tensors())
    tensors.push_back({{"name", t.name}, {"shape", t.shape}});
  header["tensors"] = tensors;

  const std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& t : ckpt.params.tensors()) write_doubles(out, t.data);
  write_doubles(out, ckpt.scalers.x_mean);
  write_doubles(out, ckpt.scalers.x_std);
  write_doubles(out, ckpt.bin_edges);
  if (!out) throw IngestError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IngestError("load_checkpoint: bad magic in " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw IngestError("load_checkpoint: truncated header in " + path);
  const nlohmann::json header = nlohmann::json::parse(hs);

  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.spline_cfg.input_dim = header.at("spline").at("input_dim").get<size_t>();
  ckpt.spline_cfg.degree = header.at("spline").at("degree").get<int>();
  ckpt.spline_cfg.knots = header.at("spline").at("knots").get<size_t>();
  ckpt.spline_cfg.eps = header.at("spline").at("eps").get<double>();
  ckpt.hist_cfg.input_dim = header.at("hist").at("input_dim").get<size_t>();
  ckpt.hist_cfg.bins = header.at("hist").at("bins").get<int>();
  ckpt.scalers.y_min = header.at("y_min").get<double>();
  ckpt.scalers.y_max = header.at("y_max").get<double>();
  ckpt.best_val_loss = header.at("best_val_loss").get<double>();
  ckpt.seed = header.at("seed").get<uint64_t>();

  for (const auto& t : header.at("tensors")) {
    grad::Tensor& tensor = ckpt.params.add(t.at("name").get<std::string>(),
                                           t.at("shape").get<std::vector<uint32_t>>());
    read_doubles(in, tensor.data, tensor.size());
  }
  const size_t x_dim = header.at("x_dim").get<size_t>();
  read_doubles(in, ckpt.scalers.x_mean, x_dim);
  read_doubles(in, ckpt.scalers.x_std, x_dim);
  read_doubles(in, ckpt.bin_edges, header.at("bin_edge_count").get<size_t>());
  return ckpt;
}

}  // namespace model
