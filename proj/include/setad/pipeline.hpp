#pragma once

#include <string>
#include <vector>

#include "setad/data.hpp"
#include "setad/run_config.hpp"
#include "setad/scorer.hpp"
#include "setad/trainer.hpp"

namespace setad::pipeline {

// Loads `config.data`, splits and normalizes it.
data::Dataset load_dataset(const RunConfig& config);
data::PreparedData prepare(const data::Dataset& dataset, const RunConfig& config);

trainer::TrainResult train(const data::PreparedData& prepared, const RunConfig& config);

// Scores the held-out split against X_U.
scorer::ScoreReport score(const encoder::ModelParams& model, const data::PreparedData& prepared,
                          const RunConfig& config);

struct ExperimentResult {
  data::PreparedData prepared;
  trainer::TrainResult training;
  scorer::ScoreReport report;
};

// split + normalize + train + score with one config.
ExperimentResult run_experiment(const data::Dataset& dataset, const RunConfig& config);

// Writes model.bin, train_log.jsonl, config.txt and prepared/ under `dir`.
void write_training_outputs(const std::string& dir, const ExperimentResult& result, const RunConfig& config);

struct SweepRow {
  std::string axis;
  double value = 0.0;
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  double wall_ms = 0.0;
  std::string status;  // "ok" or "failed:<category>"
  std::string message;
};

inline const std::vector<std::string> kSweepAxes = {"set_size", "contamination", "labeled_ratio"};

// Config for sweep point `index` with the axis set to `value`; seeds are
// offset by the index.
RunConfig sweep_point_config(const RunConfig& base, const std::string& axis, double value, std::size_t index);

// One train+score run per axis value, rows ordered by value. A failing value
// yields a failed row; the others still run.
std::vector<SweepRow> run_sweep(const data::Dataset& dataset, const RunConfig& config);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool record_timing);

}  // namespace setad::pipeline
