// setad: train, score, evaluate, synthesize and sweep from the command line.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "setad/data.hpp"
#include "setad/encoder.hpp"
#include "setad/error.hpp"
#include "setad/metrics.hpp"
#include "setad/pipeline.hpp"
#include "setad/run_config.hpp"
#include "setad/scorer.hpp"

namespace fs = std::filesystem;
using setad::Error;
using setad::ErrorKind;
using setad::RunConfig;

namespace {

int exit_code(ErrorKind kind) { return 2 + static_cast<int>(kind); }

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(Command& cmd) {
  cmd.app->add_option("--config", cmd.config_path, "key=value config file (flags override it)");
  for (const auto& key : setad::config_keys()) {
    std::string flag = key.name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    cmd.app->add_option("--" + flag, cmd.overrides[key.name], key.help);
  }
}

RunConfig resolve(const Command& cmd) {
  RunConfig config;
  if (!cmd.config_path.empty()) config = setad::load_config(cmd.config_path);
  for (const auto& key : setad::config_keys()) {
    std::string flag = key.name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (cmd.app->count("--" + flag) > 0) setad::apply_setting(config, key.name, cmd.overrides.at(key.name));
  }
  return config;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create directory " + dir + ": " + ec.message());
}

int cmd_synth(const RunConfig& config) {
  const std::string path = config.out == RunConfig{}.out ? "synthetic.csv" : config.out;
  const auto data = setad::data::synth_blobs(config.n_normal, config.n_anomaly, config.dim, config.separation,
                                             config.seed);
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  setad::data::write_csv(path, data);
  std::cout << "wrote " << data.rows() << " rows (" << data.anomaly_count() << " anomalies) to " << path << '\n';
  return 0;
}

int cmd_train(const RunConfig& config) {
  const auto dataset = setad::pipeline::load_dataset(config);
  setad::pipeline::ExperimentResult result;
  result.prepared = setad::pipeline::prepare(dataset, config);
  result.training = setad::pipeline::train(result.prepared, config);
  setad::pipeline::write_training_outputs(config.out, result, config);
  const auto& best = result.training;
  std::cout << "trained " << best.history.size() << " epochs; best epoch " << best.best_epoch;
  if (best.best_epoch > 0) std::cout << " (mean loss " << best.history[best.best_epoch - 1].mean_loss << ")";
  std::cout << "\nwrote " << config.out << "/model.bin\n";
  return 0;
}

int cmd_score(const RunConfig& config) {
  const std::string model_path = !config.model.empty() ? config.model : (config.run.empty() ? "" : config.run + "/model.bin");
  const std::string prepared_dir =
      !config.prepared.empty() ? config.prepared : (config.run.empty() ? "" : config.run + "/prepared");
  if (model_path.empty() || prepared_dir.empty()) {
    throw Error(ErrorKind::io, "score needs --run, or both --model and --prepared");
  }
  const auto model = setad::encoder::load_model(model_path);
  const auto prepared = setad::data::load_prepared(prepared_dir);

  setad::data::Dataset test = prepared.test;
  if (!config.test_data.empty()) {
    setad::data::CsvOptions options;
    options.label_column = config.label_column;
    options.unlabeled = config.unlabeled_test;
    const auto raw = setad::data::load_csv(config.test_data, options);
    if (raw.dim() != prepared.stats.input_dim) {
      throw Error(ErrorKind::shape, "test data has " + std::to_string(raw.dim()) + " features, model was trained on " +
                                        std::to_string(prepared.stats.input_dim));
    }
    test.features = prepared.stats.apply(raw.features);
    test.labels = raw.labels;
  }

  auto report = setad::scorer::score_dataset(model, test, prepared.unlabeled, config.scoring_options());
  report.train_seed = config.seed;

  const std::string out_dir = config.out != RunConfig{}.out || config.run.empty() ? config.out : config.run;
  ensure_dir(out_dir);
  {
    std::ofstream out(out_dir + "/report.json", std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + out_dir + "/report.json");
    setad::scorer::write_report(out, report);
  }
  setad::save_config(out_dir + "/score_config.txt", config);
  std::cout << "scored " << report.points.size() << " points";
  if (report.metrics) std::cout << "; auc_roc=" << report.metrics->auc_roc << " auc_pr=" << report.metrics->auc_pr;
  std::cout << "\nwrote " << out_dir << "/report.json\n";
  return 0;
}

int cmd_evaluate(const RunConfig& config) {
  const std::string path = !config.report.empty() ? config.report : (config.run.empty() ? "" : config.run + "/report.json");
  if (path.empty()) throw Error(ErrorKind::io, "evaluate needs --report or --run");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open report " + path);
  const auto report = setad::scorer::read_report(in);
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (const auto& p : report.points) {
    if (!p.label) throw Error(ErrorKind::score, "report has unlabeled points; nothing to evaluate");
    scores.push_back(p.score);
    labels.push_back(*p.label);
  }
  const auto m = setad::metrics::evaluate(scores, labels);
  std::cout << nlohmann::ordered_json{{"auc_roc", m.auc_roc}, {"auc_pr", m.auc_pr}, {"n_pos", m.n_pos}, {"n_neg", m.n_neg}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_sweep(const RunConfig& config) {
  if (std::find(setad::pipeline::kSweepAxes.begin(), setad::pipeline::kSweepAxes.end(), config.axis) ==
      setad::pipeline::kSweepAxes.end()) {
    throw Error(ErrorKind::config, "unknown sweep axis '" + config.axis + "' (expected set_size, contamination or labeled_ratio)");
  }
  const auto dataset = config.data.empty()
                           ? setad::data::synth_blobs(config.n_normal, config.n_anomaly, config.dim, config.separation, config.seed)
                           : setad::pipeline::load_dataset(config);
  const auto rows = setad::pipeline::run_sweep(dataset, config);
  ensure_dir(config.out);
  {
    std::ofstream out(config.out + "/sweep.csv", std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + config.out + "/sweep.csv");
    setad::pipeline::write_sweep_csv(out, rows, config.record_timing);
  }
  setad::save_config(config.out + "/config.txt", config);
  std::cout << "wrote " << rows.size() << " rows to " << config.out << "/sweep.csv\n";
  for (const auto& r : rows) {
    if (r.status != "ok") {
      const auto kind = r.status.substr(r.status.find(':') + 1);
      for (ErrorKind k : {ErrorKind::io, ErrorKind::parse, ErrorKind::config, ErrorKind::shape, ErrorKind::train,
                          ErrorKind::score}) {
        if (setad::to_string(k) == kind) throw Error(k, "sweep value " + std::to_string(r.value) + " failed: " + r.message);
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"setad: semi-supervised anomaly detection with set-level graded learning"};
  app.require_subcommand(1);

  std::map<std::string, Command> commands;
  const std::vector<std::pair<std::string, std::string>> specs = {
      {"synth", "write a synthetic blob dataset as CSV"},
      {"train", "split, normalize and train; writes model, log, config and prepared data"},
      {"score", "context-calibrated scoring of a test set with a trained model"},
      {"evaluate", "recompute AUC-ROC / AUC-PR from a score report"},
      {"sweep", "train+score over a list of set sizes, contamination rates or labeled ratios"},
  };
  for (const auto& [name, help] : specs) {
    Command& cmd = commands[name];
    cmd.app = app.add_subcommand(name, help);
    add_config_flags(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  for (auto& [name, cmd] : commands) {
    if (!cmd.app->parsed()) continue;
    try {
      const RunConfig config = resolve(cmd);
      if (name == "synth") return cmd_synth(config);
      if (name == "train") return cmd_train(config);
      if (name == "score") return cmd_score(config);
      if (name == "evaluate") return cmd_evaluate(config);
      if (name == "sweep") return cmd_sweep(config);
    } catch (const Error& e) {
      std::cerr << "error[" << setad::to_string(e.kind()) << "]: " << e.what() << '\n';
      return exit_code(e.kind());
    } catch (const std::exception& e) {
      const ErrorKind kind = name == "score" || name == "evaluate" ? ErrorKind::score : ErrorKind::train;
      std::cerr << "error[" << setad::to_string(kind) << "]: " << e.what() << '\n';
      return exit_code(kind);
    }
  }
  return 0;
}
