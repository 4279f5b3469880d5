#include "setad/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "setad/error.hpp"

namespace setad {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorKind::config, "config key '" + key + "': '" + value + "' is not " + expected);
}

template <class T>
T parse_as(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if constexpr (std::is_same_v<T, bool>) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "a boolean");
  } else if constexpr (std::is_same_v<T, double>) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) bad_value(key, value, "a number");
    return out;
  } else {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
      bad_value(key, value, "a non-negative integer");
    }
    return out;
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  const std::string value = trim(raw);
  if (value.empty()) return out;
  std::stringstream ss(value);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(parse_as<double>(key, cell));
  return out;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

template <class T>
ConfigKey number_key(std::string name, std::string help, T RunConfig::*member) {
  return {name, std::move(help),
          [member](const RunConfig& c) {
            if constexpr (std::is_same_v<T, double>) {
              return fmt(c.*member);
            } else if constexpr (std::is_same_v<T, bool>) {
              return std::string(c.*member ? "true" : "false");
            } else {
              return std::to_string(c.*member);
            }
          },
          [member, name](RunConfig& c, const std::string& v) { c.*member = parse_as<T>(name, v); }};
}

ConfigKey string_key(std::string name, std::string help, std::string RunConfig::*member,
                     std::vector<std::string> choices = {}) {
  return {name, std::move(help), [member](const RunConfig& c) { return c.*member; },
          [member, name, choices](RunConfig& c, const std::string& raw) {
            const std::string v = trim(raw);
            if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end()) {
              std::string allowed;
              for (const auto& ch : choices) allowed += (allowed.empty() ? "" : "|") + ch;
              throw Error(ErrorKind::config, "config key '" + name + "': '" + v + "' is not one of " + allowed);
            }
            c.*member = v;
          }};
}

template <class T>
ConfigKey optional_key(std::string name, std::string help, std::optional<T> RunConfig::*member) {
  return {name, std::move(help),
          [member](const RunConfig& c) {
            if (!(c.*member)) return std::string();
            if constexpr (std::is_same_v<T, double>) {
              return fmt(*(c.*member));
            } else {
              return std::to_string(*(c.*member));
            }
          },
          [member, name](RunConfig& c, const std::string& v) {
            if (trim(v).empty()) {
              c.*member = std::nullopt;
            } else {
              c.*member = parse_as<T>(name, v);
            }
          }};
}

ConfigKey list_key(std::string name, std::string help, std::vector<double> RunConfig::*member) {
  return {name, std::move(help), [member](const RunConfig& c) { return join(c.*member); },
          [member, name](RunConfig& c, const std::string& v) { c.*member = parse_list(name, v); }};
}

std::vector<ConfigKey> build_keys() {
  using C = RunConfig;
  return {
      string_key("data", "input CSV (last column is the 0/1 label)", &C::data),
      string_key("label_column", "name of the label column (default: last column)", &C::label_column),
      string_key("test_data", "external CSV to score instead of the held-out split", &C::test_data),
      number_key("unlabeled_test", "test_data has no label column", &C::unlabeled_test),
      string_key("out", "output directory (or file for synth)", &C::out),
      string_key("run", "directory written by `train`", &C::run),
      string_key("model", "model file (default: <run>/model.bin)", &C::model),
      string_key("prepared", "prepared-data directory (default: <run>/prepared)", &C::prepared),
      string_key("report", "score report to evaluate", &C::report),
      number_key("seed", "seed for splitting, initialization and set sampling", &C::seed),
      number_key("score_seed", "seed for context and reference sampling", &C::score_seed),
      number_key("set_size", "points per set (k)", &C::set_size),
      number_key("latent_dim", "embedding width (d_h)", &C::latent_dim),
      number_key("heads", "attention heads (h)", &C::heads),
      number_key("depth", "attention blocks", &C::depth),
      string_key("pooling", "set aggregation", &C::pooling, {"sum", "max"}),
      string_key("loss", "graded regression loss", &C::loss, {"mae", "mse"}),
      number_key("epochs", "training epochs", &C::epochs),
      number_key("batches_per_epoch", "mini-batches per epoch", &C::batches_per_epoch),
      number_key("batch_size", "sets per mini-batch (B)", &C::batch_size),
      number_key("learning_rate", "RMSProp learning rate", &C::learning_rate),
      number_key("weight_decay", "L2 weight decay (biases exempt)", &C::weight_decay),
      number_key("rmsprop_rho", "RMSProp smoothing constant", &C::rmsprop_rho),
      number_key("rmsprop_epsilon", "RMSProp epsilon", &C::rmsprop_epsilon),
      list_key("grade_mix", "probabilities of grades 0,1,2,...", &C::grade_mix),
      number_key("n_contexts", "contexts per test point (n_C)", &C::n_contexts),
      number_key("n_refs", "reference points per context (n_r)", &C::n_refs),
      number_key("exhaustive_refs", "use every pool point as a reference", &C::exhaustive_refs),
      number_key("exclude_context", "references never coincide with context members", &C::exclude_context),
      number_key("threads", "worker threads for scoring and sweeps", &C::threads),
      number_key("test_fraction", "held-out test fraction", &C::test_fraction),
      optional_key("labeled_count", "labeled anomalies m (absolute)", &C::labeled_count),
      optional_key("labeled_ratio", "labeled anomalies as a fraction of training anomalies", &C::labeled_ratio),
      number_key("contamination_cap", "maximum anomaly fraction in the unlabeled pool", &C::contamination_cap),
      number_key("exact_contamination", "fill the unlabeled pool to exactly the cap or fail", &C::exact_contamination),
      string_key("norm_stats", "rows used for z-score statistics", &C::norm_stats, {"train", "all"}),
      number_key("n_normal", "synthetic normal points", &C::n_normal),
      number_key("n_anomaly", "synthetic anomalies", &C::n_anomaly),
      number_key("dim", "synthetic feature count", &C::dim),
      number_key("separation", "synthetic anomaly shell radius / sqrt(dim)", &C::separation),
      string_key("axis", "sweep axis", &C::axis),
      list_key("values", "sweep values", &C::values),
      number_key("record_timing", "write wall-clock times into sweep output", &C::record_timing),
  };
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  }
  throw Error(ErrorKind::config, "unknown config key '" + key + "'");
}

std::string to_kv(const RunConfig& config) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + "=" + k.get(config) + "\n";
  return out;
}

RunConfig from_kv(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config, "config line " + std::to_string(line_no) + ": expected key=value");
    }
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_kv(ss.str(), std::move(base));
}

void save_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write config file " + path);
  out << to_kv(config);
}

trainer::Hyperparams RunConfig::hyperparams() const {
  trainer::Hyperparams hp;
  hp.set_size = set_size;
  hp.latent_dim = latent_dim;
  hp.heads = heads;
  hp.depth = depth;
  hp.pooling = pooling == "max" ? encoder::Pooling::max : encoder::Pooling::sum;
  hp.loss = loss == "mse" ? trainer::LossKind::mse : trainer::LossKind::mae;
  hp.epochs = epochs;
  hp.batches_per_epoch = batches_per_epoch;
  hp.batch_size = batch_size;
  hp.learning_rate = learning_rate;
  hp.weight_decay = weight_decay;
  hp.rmsprop_rho = rmsprop_rho;
  hp.rmsprop_epsilon = rmsprop_epsilon;
  hp.grade_mix = grade_mix;
  hp.n_contexts = n_contexts;
  hp.n_refs = n_refs;
  hp.seed = seed;
  return hp;
}

data::SplitSpec RunConfig::split_spec() const {
  data::SplitSpec s;
  s.test_fraction = test_fraction;
  s.labeled_count = labeled_count;
  s.labeled_ratio = labeled_ratio;
  s.contamination_cap = contamination_cap;
  s.exact_contamination = exact_contamination;
  s.seed = seed;
  return s;
}

data::NormSource RunConfig::norm_source() const {
  return norm_stats == "all" ? data::NormSource::all : data::NormSource::train;
}

scorer::ScoringOptions RunConfig::scoring_options() const {
  scorer::ScoringOptions o;
  o.set_size = set_size;
  o.n_contexts = n_contexts;
  o.n_refs = n_refs;
  o.exhaustive_refs = exhaustive_refs;
  o.exclude_context = exclude_context;
  o.seed = score_seed;
  o.threads = threads;
  return o;
}

}  // namespace setad
