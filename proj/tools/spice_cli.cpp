#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "spice/conformal.hpp"
#include "spice/data.hpp"
#include "spice/format.hpp"
#include "spice/metrics.hpp"
#include "spice/model.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using namespace spice;

namespace {

struct Options {
  std::string data_path;
  std::string target_col = "y";
  std::string model = "spice-nd";
  int degree = 1;
  size_t knots = 31;
  int bins = 21;
  double alpha = 0.1;
  double lr = 5e-3;
  uint64_t seed = 0;
  int bisection_steps = conformal::kDefaultBisectionSteps;
  std::string out_dir = ".";
  size_t count = 2000;
  size_t batch_size = 512;
  size_t max_batches = 50000;
  size_t patience = 125;
  std::string checkpoint_path;
  std::string calibration_path;
  std::string split = "test";
};

void ensure_out(const Options& o) { fs::create_directories(o.out_dir); }

void write_config(const Options& o, const std::string& command) {
  nlohmann::json j;
  j["command"] = command;
  j["data"] = o.data_path;
  j["target_col"] = o.target_col;
  j["model"] = o.model;
  j["degree"] = o.degree;
  j["knots"] = o.knots;
  j["bins"] = o.bins;
  j["alpha"] = fmt17(o.alpha);
  j["lr"] = fmt17(o.lr);
  j["seed"] = o.seed;
  j["bisection_steps"] = o.bisection_steps;
  j["out"] = o.out_dir;
  j["count"] = o.count;
  j["batch_size"] = o.batch_size;
  j["max_batches"] = o.max_batches;
  j["patience"] = o.patience;
  j["checkpoint"] = o.checkpoint_path;
  j["calibration"] = o.calibration_path;
  j["split"] = o.split;
  std::ofstream out(fs::path(o.out_dir) / ("config_" + command + ".json"));
  if (!out) throw IngestError("cannot write config to " + o.out_dir);
  out << j.dump(2) << "\n";
}

conformal::ScoreKind kind_of_model(const std::string& model) {
  if (model == "spice-nd") return conformal::ScoreKind::kNd;
  if (model == "spice-hpd") return conformal::ScoreKind::kHpd;
  if (model == "hist") return conformal::ScoreKind::kHist;
  throw ConfigError("unknown model '" + model + "' (expected spice-nd, spice-hpd, or hist)");
}

model::TrainConfig train_config(const Options& o) {
  model::TrainConfig cfg;
  cfg.lr = o.lr;
  cfg.seed = o.seed;
  cfg.batch_size = o.batch_size;
  cfg.max_batches = o.max_batches;
  cfg.patience_passes = o.patience;
  return cfg;
}

data::DatasetBundle load_bundle(const Options& o) {
  if (o.data_path.empty()) throw ConfigError("--data is required");
  const data::RawDataset raw = data::load_csv(o.data_path, o.target_col);
  return data::preprocess(raw, o.seed);
}

void cmd_synth(const Options& o) {
  ensure_out(o);
  const data::RawDataset ds = data::synthetic_bimodal(o.count, o.seed);
  const fs::path path = fs::path(o.out_dir) / "synthetic.csv";
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path.string());
  out << "x,y\n";
  for (size_t i = 0; i < ds.rows(); ++i)
    out << fmt17(ds.x[i]) << "," << fmt17(ds.y[i]) << "\n";
  write_config(o, "synth");
  std::cout << "wrote " << path.string() << " (" << ds.rows() << " rows)\n";
}

void write_train_log(const fs::path& path, const model::TrainResult& res) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path.string());
  out << "step,train_loss,val_loss,lr\n";
  for (const auto& e : res.log)
    out << e.step << "," << fmt17(e.train_loss) << "," << fmt17(e.val_loss) << ","
        << fmt17(e.lr) << "\n";
}

void cmd_train(const Options& o) {
  ensure_out(o);
  const data::DatasetBundle bundle = load_bundle(o);
  const conformal::ScoreKind kind = kind_of_model(o.model);

  model::Checkpoint ckpt;
  ckpt.scalers = bundle.scalers;
  ckpt.seed = o.seed;
  model::TrainResult res;
  if (kind == conformal::ScoreKind::kHist) {
    model::HistModel m({bundle.dim, o.bins}, o.seed);
    res = model::train_hist(m, bundle, train_config(o));
    ckpt.kind = "hist";
    ckpt.hist_cfg = m.config();
    ckpt.bin_edges = m.bin_edges();
    ckpt.params = m.params();
  } else {
    model::SplineModel m({bundle.dim, o.degree, o.knots}, o.seed);
    res = model::train_spline(m, bundle, train_config(o));
    ckpt.kind = "spline";
    ckpt.spline_cfg = m.config();
    ckpt.params = m.params();
  }
  ckpt.best_val_loss = res.best_val_loss;

  const fs::path ckpt_path = fs::path(o.out_dir) / "model.ckpt";
  model::save_checkpoint(ckpt_path.string(), ckpt);
  write_train_log(fs::path(o.out_dir) / "train_log.csv", res);
  write_config(o, "train");
  std::cout << "trained " << o.model << ": best val loss " << fmt17(res.best_val_loss)
            << " at step " << res.best_step << " (" << res.total_steps << " steps, "
            << res.passes << " passes)\n"
            << "wrote " << ckpt_path.string() << "\n";
}

// Rebuilds the in-memory model matching a checkpoint.
model::SplineModel spline_from(const model::Checkpoint& ckpt) {
  model::SplineModel m(ckpt.spline_cfg, ckpt.seed);
  m.params() = ckpt.params;
  return m;
}

model::HistModel hist_from(const model::Checkpoint& ckpt) {
  model::HistModel m(ckpt.hist_cfg, ckpt.seed);
  m.set_bin_edges(ckpt.scalers.y_min, ckpt.scalers.y_max);
  m.params() = ckpt.params;
  return m;
}

void check_kind(const model::Checkpoint& ckpt, conformal::ScoreKind kind) {
  const bool want_hist = kind == conformal::ScoreKind::kHist;
  if (want_hist != (ckpt.kind == "hist"))
    throw UsageError("checkpoint kind '" + ckpt.kind + "' does not support score kind '" +
                     std::string(conformal::kind_name(kind)) + "'");
}

std::vector<double> split_scores(const model::Checkpoint& ckpt,
                                 const data::DatasetBundle& bundle, data::Split split,
                                 conformal::ScoreKind kind) {
  const std::vector<size_t> idx = bundle.indices(split);
  std::vector<double> scores;
  scores.reserve(idx.size());
  if (kind == conformal::ScoreKind::kHist) {
    const model::HistModel m = hist_from(ckpt);
    for (size_t i : idx) {
      const std::vector<double> probs = m.forward(bundle.row(i));
      scores.push_back(conformal::score_hist(probs, m.bin_of(bundle.y_raw[i])));
    }
  } else {
    const model::SplineModel m = spline_from(ckpt);
    for (size_t i : idx) {
      const double y = std::clamp(bundle.y_scaled[i], 0.0, 1.0);
      const spline::SplineDensity d = m.forward(bundle.row(i));
      scores.push_back(kind == conformal::ScoreKind::kNd ? conformal::score_nd(d, y)
                                                         : conformal::score_hpd(d, y));
    }
  }
  return scores;
}

void cmd_calibrate(const Options& o) {
  ensure_out(o);
  if (o.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");
  const model::Checkpoint ckpt = model::load_checkpoint(o.checkpoint_path);
  const conformal::ScoreKind kind = kind_of_model(o.model);
  check_kind(ckpt, kind);
  const data::DatasetBundle bundle = load_bundle(o);
  const conformal::CalibrationResult cal =
      conformal::calibrate(split_scores(ckpt, bundle, data::Split::kCal, kind), o.alpha, kind);
  const fs::path path = fs::path(o.out_dir) / "calibration.json";
  conformal::save_calibration(path.string(), cal);
  write_config(o, "calibrate");
  std::cout << "calibrated " << conformal::kind_name(kind) << ": q_hat " << fmt17(cal.q_hat)
            << " over " << cal.n_cal << " points\nwrote " << path.string() << "\n";
}

data::Split parse_split(const std::string& name) {
  if (name == "test") return data::Split::kTest;
  if (name == "calval") return data::Split::kCalVal;
  if (name == "val") return data::Split::kVal;
  throw ConfigError("--split must be test, calval, or val");
}

void write_size_histogram(const fs::path& path,
                          const std::vector<conformal::PredictionSet>& sets) {
  double mx = 0.0;
  for (const auto& s : sets) mx = std::max(mx, s.raw_size);
  constexpr int kBins = 20;
  const double width = mx > 0.0 ? mx / kBins : 1.0;
  std::vector<size_t> counts(kBins, 0);
  for (const auto& s : sets) {
    int b = static_cast<int>(std::floor(s.raw_size / width));
    counts[static_cast<size_t>(std::clamp(b, 0, kBins - 1))]++;
  }
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path.string());
  out << "size_lo,size_hi,count\n";
  for (int b = 0; b < kBins; ++b)
    out << fmt17(b * width) << "," << fmt17((b + 1) * width) << "," << counts[b] << "\n";
}

void cmd_evaluate(const Options& o) {
  ensure_out(o);
  if (o.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");
  if (o.calibration_path.empty()) throw ConfigError("--calibration is required");
  const model::Checkpoint ckpt = model::load_checkpoint(o.checkpoint_path);
  const conformal::CalibrationResult cal = conformal::load_calibration(o.calibration_path);
  check_kind(ckpt, cal.kind);
  const data::DatasetBundle bundle = load_bundle(o);
  const data::Split split = parse_split(o.split);
  const std::vector<size_t> idx = bundle.indices(split);
  if (idx.empty()) throw ConfigError("evaluate: empty split '" + o.split + "'");

  std::vector<conformal::PredictionSet> sets;
  std::vector<double> truths;
  sets.reserve(idx.size());
  if (cal.kind == conformal::ScoreKind::kHist) {
    const model::HistModel m = hist_from(ckpt);
    for (size_t i : idx) {
      sets.push_back(
          conformal::predict_set_hist(m.forward(bundle.row(i)), cal, bundle.scalers));
      truths.push_back(bundle.y_raw[i]);
    }
  } else {
    const model::SplineModel m = spline_from(ckpt);
    for (size_t i : idx) {
      const spline::SplineDensity d = m.forward(bundle.row(i));
      sets.push_back(cal.kind == conformal::ScoreKind::kNd
                         ? conformal::predict_set_nd(d, cal, bundle.scalers)
                         : conformal::predict_set_hpd(d, cal, bundle.scalers,
                                                      o.bisection_steps));
      truths.push_back(bundle.y_raw[i]);
    }
  }

  std::vector<double> train_y, cal_y;
  for (size_t i = 0; i < bundle.rows(); ++i) {
    if (bundle.split[i] == data::Split::kTrain) train_y.push_back(bundle.y_raw[i]);
    if (bundle.split[i] == data::Split::kCal) cal_y.push_back(bundle.y_raw[i]);
  }
  const double norm = metrics::normalization_constant(train_y, cal_y, cal.alpha);
  const metrics::EvalReport report = metrics::evaluate(sets, truths, cal.alpha, norm);

  const fs::path dir(o.out_dir);
  {
    std::ofstream out(dir / "report.json");
    out << metrics::report_json(report) << "\n";
  }
  {
    std::ofstream out(dir / "report.csv");
    out << metrics::report_csv_header() << "\n" << metrics::report_csv_row(report) << "\n";
  }
  {
    std::ofstream out(dir / "sets.jsonl");
    for (size_t k = 0; k < sets.size(); ++k)
      out << conformal::set_record_json(idx[k], cal, sets[k]) << "\n";
  }
  write_size_histogram(dir / "size_hist.csv", sets);
  write_config(o, "evaluate");
  std::cout << "evaluated " << idx.size() << " samples: coverage " << fmt17(report.coverage)
            << ", mean size " << fmt17(report.mean_size) << ", normalized "
            << fmt17(report.mean_normalized_size) << "\n";
}

void cmd_pipeline(Options o) {
  ensure_out(o);
  if (o.data_path.empty()) {
    Options synth = o;
    cmd_synth(synth);
    o.data_path = (fs::path(o.out_dir) / "synthetic.csv").string();
  }
  cmd_train(o);
  o.checkpoint_path = (fs::path(o.out_dir) / "model.ckpt").string();
  cmd_calibrate(o);
  o.calibration_path = (fs::path(o.out_dir) / "calibration.json").string();
  cmd_evaluate(o);
  write_config(o, "pipeline");
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data_path, "input CSV path");
  cmd->add_option("--target-col", o.target_col, "target column name");
  cmd->add_option("--model", o.model)
      ->check(CLI::IsMember({"spice-nd", "spice-hpd", "hist"}));
  cmd->add_option("--degree", o.degree)->check(CLI::IsMember({1, 2}));
  cmd->add_option("--knots", o.knots);
  cmd->add_option("--bins", o.bins);
  cmd->add_option("--alpha", o.alpha);
  cmd->add_option("--lr", o.lr);
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--bisection-steps", o.bisection_steps);
  cmd->add_option("--out", o.out_dir);
  cmd->add_option("--count", o.count, "synthetic sample count");
  cmd->add_option("--batch-size", o.batch_size);
  cmd->add_option("--max-batches", o.max_batches);
  cmd->add_option("--patience", o.patience, "early-stopping patience in passes");
  cmd->add_option("--checkpoint", o.checkpoint_path);
  cmd->add_option("--calibration", o.calibration_path);
  cmd->add_option("--split", o.split)->check(CLI::IsMember({"test", "calval", "val"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional-density conformal prediction pipeline"};
  app.require_subcommand(1);
  Options o;
  add_common(app.add_subcommand("synth", "generate the synthetic bimodal dataset"), o);
  add_common(app.add_subcommand("train", "fit a model and write a checkpoint"), o);
  add_common(app.add_subcommand("calibrate", "compute the conformal cutoff"), o);
  add_common(app.add_subcommand("evaluate", "build prediction sets and report metrics"), o);
  add_common(app.add_subcommand("pipeline", "synth + train + calibrate + evaluate"), o);
  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("synth")) cmd_synth(o);
    if (app.got_subcommand("train")) cmd_train(o);
    if (app.got_subcommand("calibrate")) cmd_calibrate(o);
    if (app.got_subcommand("evaluate")) cmd_evaluate(o);
    if (app.got_subcommand("pipeline")) cmd_pipeline(o);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const IngestError& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return 3;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 5;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
