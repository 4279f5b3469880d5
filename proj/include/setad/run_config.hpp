#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "setad/data.hpp"
#include "setad/scorer.hpp"
#include "setad/trainer.hpp"

namespace setad {

// Flat key=value run record. Every numeric default matches trainer::Hyperparams
// and data::SplitSpec.
struct RunConfig {
  // paths
  std::string data;
  std::string label_column;
  std::string test_data;
  bool unlabeled_test = false;
  std::string out = "setad_run";
  std::string run;
  std::string model;
  std::string prepared;
  std::string report;

  // seeds
  std::uint64_t seed = 0;
  std::uint64_t score_seed = 1;

  // model and training
  std::size_t set_size = 8;
  std::size_t latent_dim = 20;
  std::size_t heads = 2;
  std::size_t depth = 1;
  std::string pooling = "sum";
  std::string loss = "mae";
  std::size_t epochs = 20;
  std::size_t batches_per_epoch = 20;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 0.1;
  double rmsprop_rho = 0.99;
  double rmsprop_epsilon = 1e-8;
  std::vector<double> grade_mix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  // scoring
  std::size_t n_contexts = 60;
  std::size_t n_refs = 30;
  bool exhaustive_refs = false;
  bool exclude_context = true;
  std::size_t threads = 1;

  // data protocol
  double test_fraction = 0.2;
  std::optional<std::size_t> labeled_count;
  std::optional<double> labeled_ratio;
  double contamination_cap = 0.02;
  bool exact_contamination = false;
  std::string norm_stats = "train";

  // synthetic data
  std::size_t n_normal = 2000;
  std::size_t n_anomaly = 40;
  std::size_t dim = 10;
  double separation = 4.0;

  // sweeps
  std::string axis;
  std::vector<double> values;
  bool record_timing = true;

  trainer::Hyperparams hyperparams() const;
  data::SplitSpec split_spec() const;
  data::NormSource norm_source() const;
  scorer::ScoringOptions scoring_options() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();

// Every key, one per line, in config_keys() order.
std::string to_kv(const RunConfig& config);
// Applies `key=value` lines over `base`; '#' starts a comment. Unknown keys and
// malformed values raise config errors.
RunConfig from_kv(const std::string& text, RunConfig base = {});
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

RunConfig load_config(const std::string& path, RunConfig base = {});
void save_config(const std::string& path, const RunConfig& config);

}  // namespace setad
