#include "setad/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>

#include "setad/error.hpp"

namespace setad::pipeline {

namespace fs = std::filesystem;

data::Dataset load_dataset(const RunConfig& config) {
  if (config.data.empty()) throw Error(ErrorKind::io, "no data path given");
  data::CsvOptions options;
  options.label_column = config.label_column;
  return data::load_csv(config.data, options);
}

data::PreparedData prepare(const data::Dataset& dataset, const RunConfig& config) {
  return data::prepare(dataset, config.split_spec(), config.norm_source());
}

trainer::TrainResult train(const data::PreparedData& prepared, const RunConfig& config) {
  return trainer::train(prepared.unlabeled, prepared.anomalies, config.hyperparams());
}

scorer::ScoreReport score(const encoder::ModelParams& model, const data::PreparedData& prepared,
                          const RunConfig& config) {
  auto report = scorer::score_dataset(model, prepared.test, prepared.unlabeled, config.scoring_options());
  report.train_seed = config.seed;
  return report;
}

ExperimentResult run_experiment(const data::Dataset& dataset, const RunConfig& config) {
  ExperimentResult r;
  r.prepared = prepare(dataset, config);
  r.training = train(r.prepared, config);
  r.report = score(r.training.model, r.prepared, config);
  return r;
}

void write_training_outputs(const std::string& dir, const ExperimentResult& result, const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory " + dir + ": " + ec.message());
  encoder::save_model(dir + "/model.bin", result.training.model);
  std::ofstream log(dir + "/train_log.jsonl", std::ios::trunc);
  if (!log) throw Error(ErrorKind::io, "cannot write " + dir + "/train_log.jsonl");
  trainer::write_training_log(log, result.training, config.hyperparams());
  save_config(dir + "/config.txt", config);
  data::save_prepared(dir + "/prepared", result.prepared);
}

RunConfig sweep_point_config(const RunConfig& base, const std::string& axis, double value, std::size_t index) {
  RunConfig c = base;
  c.seed = base.seed + index;
  c.score_seed = base.score_seed + index;
  if (axis == "set_size") {
    if (!(value >= 1.0) || value != std::floor(value)) {
      throw Error(ErrorKind::config, "set_size sweep values must be positive integers");
    }
    c.set_size = static_cast<std::size_t>(value);
  } else if (axis == "contamination") {
    c.contamination_cap = value;
    c.exact_contamination = true;
  } else if (axis == "labeled_ratio") {
    c.labeled_ratio = value;
    c.labeled_count.reset();
  } else {
    throw Error(ErrorKind::config, "unknown sweep axis '" + axis + "' (expected set_size, contamination or labeled_ratio)");
  }
  return c;
}

std::vector<SweepRow> run_sweep(const data::Dataset& dataset, const RunConfig& config) {
  if (std::find(kSweepAxes.begin(), kSweepAxes.end(), config.axis) == kSweepAxes.end()) {
    throw Error(ErrorKind::config, "unknown sweep axis '" + config.axis + "' (expected set_size, contamination or labeled_ratio)");
  }
  if (config.values.empty()) throw Error(ErrorKind::config, "sweep needs at least one value");

  std::vector<SweepRow> rows(config.values.size());
  auto run_one = [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.axis = config.axis;
    row.value = config.values[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      const RunConfig point = sweep_point_config(config, config.axis, row.value, i);
      const auto result = run_experiment(dataset, point);
      if (!result.report.metrics) throw Error(ErrorKind::score, "test split lacks one of the label classes");
      row.auc_roc = result.report.metrics->auc_roc;
      row.auc_pr = result.report.metrics->auc_pr;
      row.status = "ok";
    } catch (const Error& e) {
      row.status = "failed:" + std::string(to_string(e.kind()));
      row.message = e.what();
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, rows.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run_one(i);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t i = t; i < rows.size(); i += threads) run_one(i);
      });
    }
  }

  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.value < b.value; });
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool record_timing) {
  out << "axis,value,auc_roc,auc_pr,wall_ms,status\n";
  for (const auto& r : rows) {
    const bool ok = r.status == "ok";
    out << r.axis << ',' << fmt(r.value) << ',' << (ok ? fmt(r.auc_roc) : "") << ',' << (ok ? fmt(r.auc_pr) : "")
        << ',' << (record_timing ? fmt(std::round(r.wall_ms)) : "0") << ',' << r.status << '\n';
  }
}

}  // namespace setad::pipeline
