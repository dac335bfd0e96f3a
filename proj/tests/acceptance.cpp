// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 1, 2, and 10 share the per-seed trained models.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spice/conformal.hpp"
#include "spice/data.hpp"
#include "spice/metrics.hpp"
#include "spice/model.hpp"
#include "spice/rng.hpp"

#include "density_oracle.hpp"

using namespace spice;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s — %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

spline::SplineDensity random_density(Rng& rng, int degree, size_t k) {
  std::vector<double> raw(k - 1);
  for (double& v : raw) v = rng.uniform(-2.0, 2.0);
  std::vector<double> he(k);
  for (double& v : he) v = std::log1p(std::exp(rng.uniform(-2.0, 2.0)));
  std::vector<double> hm;
  if (degree == 2) {
    hm.resize(k - 1);
    for (double& v : hm) v = rng.uniform(-1.0, 2.0);
  }
  return spline::build_density(spline::knot_positions(raw, k, 1e-3), he, hm, degree);
}

data::Scalers identity_scalers() {
  data::Scalers s;
  s.x_mean = {0.0};
  s.x_std = {1.0};
  s.y_min = 0.0;
  s.y_max = 1.0;
  return s;
}

// ---------------------------------------------------------------------------
// Shared synthetic-pipeline runs (criteria 1, 2, 10)

struct SeedResult {
  double cov_nd = 0.0, cov_hpd = 0.0, cov_hist = 0.0;
  double mean_size_nd = 0.0;
  double oracle_width = 0.0;
  double worst_nd = 0.0, worst_hpd = 0.0;
};

double single_interval_oracle(std::vector<double> ys) {
  // Smallest [grid_i, grid_j] over a 500-point grid spanning the test target
  // range that covers >= 90% of the test targets.
  std::sort(ys.begin(), ys.end());
  const size_t n = ys.size();
  const double lo = ys.front(), hi = ys.back();
  const size_t need = static_cast<size_t>(std::ceil(0.9 * static_cast<double>(n)));
  std::vector<double> grid(500);
  for (size_t g = 0; g < 500; ++g)
    grid[g] = lo + (hi - lo) * static_cast<double>(g) / 499.0;
  double best = hi - lo;
  for (size_t i = 0; i < 500; ++i) {
    const auto from = std::lower_bound(ys.begin(), ys.end(), grid[i]);
    const size_t before = static_cast<size_t>(from - ys.begin());
    if (n - before < need) break;
    // smallest j with count(grid[i], grid[j]) >= need
    for (size_t j = i; j < 500; ++j) {
      if (grid[j] - grid[i] >= best) break;
      const auto to = std::upper_bound(from, ys.end(), grid[j]);
      if (static_cast<size_t>(to - from) >= need) {
        best = grid[j] - grid[i];
        break;
      }
    }
  }
  return best;
}

SeedResult run_seed(const data::RawDataset& raw, uint64_t seed) {
  const data::DatasetBundle bundle = data::preprocess(raw, seed);

  model::TrainConfig cfg;
  cfg.lr = 5e-3;
  cfg.seed = seed;
  model::SplineModel sm({bundle.dim, 1, 31}, seed);
  model::train_spline(sm, bundle, cfg);
  model::HistModel hm({bundle.dim, 21}, seed);
  model::train_hist(hm, bundle, cfg);

  std::vector<double> nd_scores, hpd_scores, hist_scores;
  for (size_t i : bundle.indices(data::Split::kCal)) {
    const double y = std::clamp(bundle.y_scaled[i], 0.0, 1.0);
    const spline::SplineDensity d = sm.forward(bundle.row(i));
    nd_scores.push_back(conformal::score_nd(d, y));
    hpd_scores.push_back(conformal::score_hpd(d, y));
    hist_scores.push_back(
        conformal::score_hist(hm.forward(bundle.row(i)), hm.bin_of(bundle.y_raw[i])));
  }
  const double alpha = 0.1;
  const auto nd_cal = conformal::calibrate(nd_scores, alpha, conformal::ScoreKind::kNd);
  const auto hpd_cal = conformal::calibrate(hpd_scores, alpha, conformal::ScoreKind::kHpd);
  const auto hist_cal =
      conformal::calibrate(hist_scores, alpha, conformal::ScoreKind::kHist);

  std::vector<conformal::PredictionSet> nd_sets, hpd_sets, hist_sets;
  std::vector<double> truths;
  for (size_t i : bundle.indices(data::Split::kTest)) {
    const spline::SplineDensity d = sm.forward(bundle.row(i));
    nd_sets.push_back(conformal::predict_set_nd(d, nd_cal, bundle.scalers));
    hpd_sets.push_back(conformal::predict_set_hpd(d, hpd_cal, bundle.scalers));
    hist_sets.push_back(
        conformal::predict_set_hist(hm.forward(bundle.row(i)), hist_cal, bundle.scalers));
    truths.push_back(bundle.y_raw[i]);
  }

  SeedResult r;
  r.cov_nd = metrics::marginal_coverage(nd_sets, truths);
  r.cov_hpd = metrics::marginal_coverage(hpd_sets, truths);
  r.cov_hist = metrics::marginal_coverage(hist_sets, truths);
  double total = 0.0;
  for (const auto& s : nd_sets) total += s.raw_size;
  r.mean_size_nd = total / static_cast<double>(nd_sets.size());
  r.oracle_width = single_interval_oracle(truths);
  metrics::label_conditional_coverage(nd_sets, truths, &r.worst_nd);
  metrics::label_conditional_coverage(hpd_sets, truths, &r.worst_hpd);
  return r;
}

void criteria_1_2_10() {
  constexpr int kSeeds = 20;
  // One fixed dataset; the run seed varies split shuffle, init, and training
  // order while the test membership stays constant.
  const data::RawDataset raw = data::synthetic_bimodal(2000, 0);
  std::vector<SeedResult> results;
  for (int s = 0; s < kSeeds; ++s) {
    results.push_back(run_seed(raw, static_cast<uint64_t>(s)));
    std::fprintf(stderr,
                 "  seed %2d: cov nd %.4f hpd %.4f hist %.4f | nd size %.4f oracle %.4f\n",
                 s, results.back().cov_nd, results.back().cov_hpd, results.back().cov_hist,
                 results.back().mean_size_nd, results.back().oracle_width);
  }

  // criterion 1: coverage bands
  bool pass1 = true;
  std::ostringstream detail1;
  const char* names[3] = {"nd", "hpd", "hist"};
  for (int kind = 0; kind < 3; ++kind) {
    double mean = 0.0, mn = 1.0, mx = 0.0;
    for (const auto& r : results) {
      const double c = kind == 0 ? r.cov_nd : kind == 1 ? r.cov_hpd : r.cov_hist;
      mean += c;
      mn = std::min(mn, c);
      mx = std::max(mx, c);
    }
    mean /= kSeeds;
    const bool ok = mean >= 0.88 && mean <= 0.92 && mn >= 0.84 && mx <= 0.96;
    pass1 = pass1 && ok;
    detail1 << names[kind] << " mean " << mean << " range [" << mn << ", " << mx << "] ";
  }
  report(1, pass1, "synthetic coverage over 20 seeds at alpha=0.1: " + detail1.str());

  // criterion 2: ND beats the single-interval oracle by >= 20% in >= 16 seeds
  int wins = 0;
  for (const auto& r : results)
    if (r.mean_size_nd <= 0.8 * r.oracle_width) ++wins;
  report(2, wins >= 16,
         "ND mean size at least 20% below the single-interval oracle in " +
             std::to_string(wins) + "/20 seeds");

  // criterion 10: median worst-bucket coverage, HPD vs ND, first 10 seeds
  std::vector<double> worst_nd, worst_hpd;
  for (int s = 0; s < 10; ++s) {
    worst_nd.push_back(results[static_cast<size_t>(s)].worst_nd);
    worst_hpd.push_back(results[static_cast<size_t>(s)].worst_hpd);
  }
  const double med_nd = median(worst_nd), med_hpd = median(worst_hpd);
  std::ostringstream d10;
  d10 << "median worst-bucket coverage: hpd " << med_hpd << " vs nd " << med_nd;
  report(10, med_hpd >= med_nd - 0.02, d10.str());
}

// ---------------------------------------------------------------------------
// criterion 3: quadrature oracle equivalence

bool check_level(const spline::SplineDensity& d, double c, std::string* why) {
  constexpr size_t kGrid = 100000;
  const double h = 1.0 / static_cast<double>(kGrid);
  const spline::IntervalUnion set = spline::level_set(d, c);

  auto boundary_distance = [&](double y) {
    double dist = 1.0;
    for (const auto& p : set.parts()) {
      dist = std::min(dist, std::abs(y - p.lo));
      dist = std::min(dist, std::abs(y - p.hi));
    }
    return dist;
  };

  double grid_mass_below = 0.0;
  for (size_t g = 0; g < kGrid; ++g) {
    const double mid = (static_cast<double>(g) + 0.5) * h;
    const double fv = spline::density_eval(d, mid);
    if (fv <= c) grid_mass_below += fv * h;
    const bool in_grid = fv > c;
    if (in_grid != set.contains(mid) && boundary_distance(mid) >= 2e-5) {
      *why = "level-set mismatch at y=" + std::to_string(mid);
      return false;
    }
  }
  const double mass = spline::mass_below_level(d, c);
  if (std::abs(mass - grid_mass_below) >= 1e-4) {
    *why = "mass mismatch: analytic " + std::to_string(mass) + " grid " +
           std::to_string(grid_mass_below);
    return false;
  }
  return true;
}

void criterion_3() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(0x0ACCE55);
  const std::pair<int, size_t> configs[4] = {{1, 11}, {1, 31}, {2, 11}, {2, 31}};
  bool pass = true;
  std::string why;
  double worst_integral = 0.0;
  for (const auto& [degree, k] : configs) {
    for (int draw = 0; draw < 1000 && pass; ++draw) {
      const spline::SplineDensity d = random_density(rng, degree, k);
      const double err = std::abs(testing::oracle_integral(d) - 1.0);
      worst_integral = std::max(worst_integral, err);
      if (err >= 1e-8) {
        pass = false;
        why = "normalization error " + std::to_string(err);
      }
    }
    for (int lvl = 0; lvl < 20 && pass; ++lvl) {
      const spline::SplineDensity d = random_density(rng, degree, k);
      const double c = rng.uniform(0.02, 0.98) * spline::density_sup(d);
      if (!check_level(d, c, &why)) pass = false;
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (pass && secs >= 120.0) {
    pass = false;
    why = "runtime exceeded 2 minutes";
  }
  std::ostringstream d3;
  d3 << "4000 draws, max |integral-1| " << worst_integral << ", 80 level checks, "
     << secs << " s";
  report(3, pass, pass ? d3.str() : why);
}

// ---------------------------------------------------------------------------
// criterion 4: constructed-density round trips

spline::IntervalUnion random_union(Rng& rng) {
  const size_t m = 1 + rng.below(5);
  // 2m sorted breakpoints with comfortable separation
  std::vector<double> pts;
  while (true) {
    pts.clear();
    for (size_t i = 0; i < 2 * m; ++i) pts.push_back(rng.uniform(0.02, 0.98));
    std::sort(pts.begin(), pts.end());
    bool ok = true;
    for (size_t i = 0; i + 1 < pts.size(); ++i)
      if (pts[i + 1] - pts[i] < 0.015) ok = false;
    if (ok) break;
  }
  std::vector<spline::Interval> parts;
  for (size_t i = 0; i < m; ++i) parts.push_back({pts[2 * i], pts[2 * i + 1]});
  return spline::IntervalUnion::from_intervals(std::move(parts));
}

bool sets_match(const spline::IntervalUnion& a, const spline::IntervalUnion& b,
                double tol) {
  if (a.count() != b.count()) return false;
  for (size_t i = 0; i < a.count(); ++i) {
    if (std::abs(a.parts()[i].lo - b.parts()[i].lo) >= tol) return false;
    if (std::abs(a.parts()[i].hi - b.parts()[i].hi) >= tol) return false;
  }
  return true;
}

void criterion_4() {
  Rng rng(0x7E02);
  const auto scalers = identity_scalers();
  bool pass = true;
  std::string why;
  for (int trial = 0; trial < 200 && pass; ++trial) {
    const spline::IntervalUnion target = random_union(rng);
    {
      const double cutoff = rng.uniform(0.05, 0.95) / target.total_size();
      const spline::SplineDensity d =
          spline::construct_set_density(target, cutoff, spline::ConstructMode::kNd, 5);
      if (d.knot_count() != 4 * 5 + 2) {
        pass = false;
        why = "ND knot count " + std::to_string(d.knot_count());
        break;
      }
      if (!sets_match(spline::level_set(d, cutoff), target, 1e-6)) {
        pass = false;
        why = "ND round-trip mismatch at trial " + std::to_string(trial);
        break;
      }
    }
    {
      const double neg_qhat = rng.uniform(0.05, 0.95);
      const spline::SplineDensity d =
          spline::construct_set_density(target, neg_qhat, spline::ConstructMode::kHpd, 5);
      conformal::CalibrationResult cal;
      cal.alpha = 0.1;
      cal.q_hat = -neg_qhat;
      cal.n_cal = 100;
      cal.kind = conformal::ScoreKind::kHpd;
      const conformal::PredictionSet set = conformal::predict_set_hpd(d, cal, scalers, 40);
      if (!sets_match(set.scaled, target, 1e-6)) {
        pass = false;
        why = "HPD round-trip mismatch at trial " + std::to_string(trial);
        break;
      }
    }
  }
  report(4, pass, pass ? "200 random unions per mode, endpoints within 1e-6, K=4M+2" : why);
}

// ---------------------------------------------------------------------------
// criterion 5: gradient correctness, 100 random configurations per degree

void criterion_5() {
  Rng rng(0x6AD5);
  bool pass = true;
  double worst = 0.0;
  size_t kink_rescues = 0;
  std::string why;
  for (int degree = 1; degree <= 2 && pass; ++degree) {
    for (int cfg_i = 0; cfg_i < 100 && pass; ++cfg_i) {
      const size_t k = 5 + 2 * rng.below(4);        // K in {5,7,9,11}
      const size_t dim = 1 + rng.below(3);
      model::SplineModel m({dim, degree, k}, rng.next_u64());
      std::vector<std::vector<double>> store(2, std::vector<double>(dim));
      std::vector<double> ys(2);
      for (auto& row : store)
        for (double& v : row) v = rng.uniform(-2.0, 2.0);
      for (double& y : ys) y = rng.uniform();
      std::vector<std::span<const double>> xs(store.begin(), store.end());

      grad::Tape tape;
      std::vector<grad::Var> leaves;
      grad::Var root = m.nll_batch(tape, xs, ys, &leaves);
      tape.backward(root);
      std::vector<double> analytic;
      for (auto leaf : leaves) {
        auto g = tape.grad(leaf);
        analytic.insert(analytic.end(), g.begin(), g.end());
      }

      const std::vector<double> flat = m.params().flatten();
      model::SplineModel probe({dim, degree, k}, 0);
      std::vector<double> pt = flat;
      auto central = [&](size_t j, double h) {
        pt[j] = flat[j] + h;
        probe.params().unflatten(pt);
        const double up = probe.nll_plain(xs, ys);
        pt[j] = flat[j] - h;
        probe.params().unflatten(pt);
        const double dn = probe.nll_plain(xs, ys);
        pt[j] = flat[j];
        return (up - dn) / (2.0 * h);
      };
      for (size_t j = 0; j < flat.size(); ++j) {
        const double fd = central(j, 1e-5);
        double rel = std::abs(analytic[j] - fd) / std::max(1.0, std::abs(analytic[j]));
        if (rel >= 1e-4) {
          // The loss is only piecewise smooth: zero truncation and clipped
          // roots put C1 kinks and floor-sized micro-jumps (~1e-9) into it,
          // so a central difference at any single step can be polluted by
          // O(h) kink error or O(jump/h) noise. Re-check across a range of
          // steps under a 10x tighter tolerance; a wrong analytic gradient
          // disagrees with the finite difference at every step.
          for (const double h : {1e-3, 1e-4, 3e-5, 3e-6, 1e-6}) {
            const double fd_h = central(j, h);
            const double rel_h =
                std::abs(analytic[j] - fd_h) / std::max(1.0, std::abs(analytic[j]));
            if (rel_h < rel) rel = rel_h;
            if (rel < 1e-5) break;
          }
          if (rel < 1e-5) ++kink_rescues;
        }
        worst = std::max(worst, rel);
        if (rel >= 1e-4) {
          pass = false;
          why = "relative error " + std::to_string(rel) + " (degree " +
                std::to_string(degree) + ", config " + std::to_string(cfg_i) +
                ", coordinate " + std::to_string(j) + ")";
          break;
        }
      }
    }
  }
  std::ostringstream d5;
  d5 << "200 configurations, every coordinate checked, max relative error " << worst
     << " (" << kink_rescues << " non-smooth coordinates re-checked at other steps)";
  report(5, pass, pass ? d5.str() : why);
}

// ---------------------------------------------------------------------------
// criterion 6: calibrate unit examples

void criterion_6() {
  bool pass = true;
  std::vector<double> s9{1, 2, 3, 4, 5, 6, 7, 8, 9};
  pass = pass && conformal::calibrate(s9, 0.1, conformal::ScoreKind::kNd).q_hat == 9.0;
  std::vector<double> s99(99);
  for (size_t i = 0; i < 99; ++i) s99[i] = static_cast<double>(i + 1);
  pass = pass && conformal::calibrate(s99, 0.1, conformal::ScoreKind::kNd).q_hat == 90.0;
  pass = pass &&
         conformal::calibrate({1, 2, 3}, 0.5, conformal::ScoreKind::kNd).q_hat == 2.0;
  pass = pass && std::isinf(conformal::calibrate({1, 2, 3, 4, 5}, 0.01,
                                                 conformal::ScoreKind::kNd)
                                .q_hat);
  report(6, pass, "order-statistic examples and the +inf small-sample case, exact");
}

// ---------------------------------------------------------------------------
// criterion 7: 24-step bisection precision vs 1e6-point quadrature

void criterion_7() {
  Rng rng(0xB15EC7);
  bool pass = true;
  std::string why;
  constexpr size_t kGrid = 1000000;
  const double h = 1.0 / static_cast<double>(kGrid);
  for (int trial = 0; trial < 50 && pass; ++trial) {
    const spline::SplineDensity d = random_density(rng, trial % 2 + 1, 11);
    const double neg_qhat = rng.uniform(0.05, 0.95);
    double lo = 0.0, hi = spline::density_sup(d);
    for (int i = 0; i < 24; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (spline::mass_below_level(d, mid) < neg_qhat)
        lo = mid;
      else
        hi = mid;
    }
    // Grid mass-below at both bracket levels; the bisection target must lie
    // inside the band's mass range up to grid error.
    double mass_lo = 0.0, mass_hi = 0.0;
    for (size_t g = 0; g < kGrid; ++g) {
      const double fv = spline::density_eval(d, (static_cast<double>(g) + 0.5) * h);
      if (fv <= lo) mass_lo += fv * h;
      if (fv <= hi) mass_hi += fv * h;
    }
    const double tol = 2e-4;  // grid-oracle resolution
    if (!(mass_lo <= neg_qhat + tol && neg_qhat <= mass_hi + tol)) {
      pass = false;
      std::ostringstream w;
      w << "trial " << trial << ": grid mass band [" << mass_lo << ", " << mass_hi
        << "] misses target " << neg_qhat;
      why = w.str();
    }
  }
  report(7, pass,
         pass ? "50 densities: final level brackets the target mass within the band"
              : why);
}

// ---------------------------------------------------------------------------
// criterion 8: score/set duality, 1e4 triples per kind

void criterion_8() {
  Rng rng(0xD0A117);
  const auto scalers = identity_scalers();
  bool pass = true;
  std::string why;
  size_t checked_nd = 0, checked_hpd = 0, checked_hist = 0;

  for (int block = 0; block < 100 && pass; ++block) {
    const int degree = 1 + static_cast<int>(rng.below(2));
    const spline::SplineDensity d = random_density(rng, degree, 11);
    const double alpha = rng.uniform(0.05, 0.5);
    std::vector<double> nd_scores, hpd_scores;
    for (int i = 0; i < 60; ++i) {
      const double y = rng.uniform();
      nd_scores.push_back(conformal::score_nd(d, y));
      hpd_scores.push_back(conformal::score_hpd(d, y));
    }
    const auto nd_cal = conformal::calibrate(nd_scores, alpha, conformal::ScoreKind::kNd);
    const auto hpd_cal =
        conformal::calibrate(hpd_scores, alpha, conformal::ScoreKind::kHpd);
    const auto nd_set = conformal::predict_set_nd(d, nd_cal, scalers);
    // 60 steps drive the level bracket below the tie-exclusion window.
    const auto hpd_set = conformal::predict_set_hpd(d, hpd_cal, scalers, 60);

    for (int i = 0; i < 100 && pass; ++i) {
      const double y = rng.uniform();
      const double snd = conformal::score_nd(d, y);
      if (std::abs(snd - nd_cal.q_hat) > 1e-9) {
        ++checked_nd;
        if (nd_set.scaled.contains(y) != (snd <= nd_cal.q_hat)) {
          pass = false;
          why = "nd duality violated at y=" + std::to_string(y);
        }
      }
      const double shpd = conformal::score_hpd(d, y);
      if (std::abs(shpd - hpd_cal.q_hat) > 1e-9) {
        ++checked_hpd;
        if (hpd_set.scaled.contains(y) != (shpd <= hpd_cal.q_hat)) {
          pass = false;
          why = "hpd duality violated at y=" + std::to_string(y);
        }
      }
    }

    // hist: random softmax probabilities over 21 bins
    std::vector<double> probs(21);
    double sum = 0.0;
    for (double& p : probs) {
      p = std::exp(rng.uniform(-2.0, 2.0));
      sum += p;
    }
    for (double& p : probs) p /= sum;
    std::vector<double> hist_scores;
    for (int i = 0; i < 60; ++i)
      hist_scores.push_back(
          conformal::score_hist(probs, static_cast<int>(rng.below(21))));
    const auto hist_cal =
        conformal::calibrate(hist_scores, alpha, conformal::ScoreKind::kHist);
    const auto hist_set = conformal::predict_set_hist(probs, hist_cal, scalers);
    for (int i = 0; i < 100 && pass; ++i) {
      const int bin = static_cast<int>(rng.below(21));
      const double s = conformal::score_hist(probs, bin);
      if (std::abs(s - hist_cal.q_hat) > 1e-9) {
        ++checked_hist;
        const bool in = std::find(hist_set.bins.begin(), hist_set.bins.end(), bin) !=
                        hist_set.bins.end();
        if (in != (s <= hist_cal.q_hat)) {
          pass = false;
          why = "hist duality violated at bin " + std::to_string(bin);
        }
      }
    }
  }
  std::ostringstream d8;
  d8 << "checked nd " << checked_nd << ", hpd " << checked_hpd << ", hist "
     << checked_hist << " non-tied triples";
  report(8, pass, pass ? d8.str() : why);
}

// ---------------------------------------------------------------------------
// criterion 9: byte-identical pipeline reports

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_9() {
#ifdef SPICE_CLI_PATH
  const std::string cli = SPICE_CLI_PATH;
  bool pass = true;
  std::string why;
  for (const std::string dir : {"acceptance_run_a", "acceptance_run_b"}) {
    const std::string cmd = "\"" + cli + "\" pipeline --seed 0 --model spice-nd --out " +
                            dir + " > " + dir + ".log 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      pass = false;
      why = "pipeline run failed; see " + dir + ".log";
    }
  }
  if (pass) {
    for (const char* file : {"report.json", "report.csv", "sets.jsonl"}) {
      const std::string a = slurp(std::string("acceptance_run_a/") + file);
      const std::string b = slurp(std::string("acceptance_run_b/") + file);
      if (a.empty() || a != b) {
        pass = false;
        why = std::string(file) + " differs between identical runs";
        break;
      }
    }
  }
  report(9, pass, pass ? "seed-0 pipeline run twice: report.json, report.csv, sets.jsonl byte-identical" : why);
#else
  report(9, false, "CLI path not provided at build time");
#endif
}

}  // namespace

int main() {
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criteria_1_2_10();
  std::printf("%s\n", g_failures == 0 ? "ALL CRITERIA PASSED"
                                      : "FAILURES PRESENT");
  return g_failures == 0 ? 0 : 1;
}
