#include "setad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "setad/error.hpp"
#include "setad/random.hpp"

namespace setad::data {

namespace fs = std::filesystem;

std::size_t Dataset::anomaly_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.features = features.gather_rows(rows);
  out.feature_names = feature_names;
  if (labeled()) {
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) out.labels.push_back(labels[r]);
  }
  return out;
}

// --- CSV -------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options, const std::string& source) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      rows.emplace_back(line_no, split_fields(line));
    }
  }
  if (rows.empty()) throw Error(ErrorKind::parse, source + ": empty file");

  const std::size_t width = rows.front().second.size();
  bool has_header = false;
  for (const auto& cell : rows.front().second) {
    if (!parse_number(cell)) {
      has_header = true;
      break;
    }
  }
  std::vector<std::string> header;
  if (has_header) {
    header = rows.front().second;
    rows.erase(rows.begin());
  }

  std::optional<std::size_t> label_col;
  if (!options.unlabeled) {
    if (options.label_column.empty()) {
      if (width < 2) throw Error(ErrorKind::parse, source + ": need at least one feature and a label column");
      label_col = width - 1;
    } else {
      const auto it = std::find(header.begin(), header.end(), options.label_column);
      if (it == header.end()) {
        throw Error(ErrorKind::parse, source + ": label column '" + options.label_column + "' not found in header");
      }
      label_col = static_cast<std::size_t>(it - header.begin());
    }
  }

  const std::size_t d = label_col ? width - 1 : width;
  // A header-only file is an empty dataset, not an error.
  Dataset out;
  out.features = Matrix(rows.size(), d);
  if (label_col) out.labels.resize(rows.size());
  for (std::size_t c = 0; c < width; ++c) {
    if (label_col && c == *label_col) continue;
    out.feature_names.push_back(has_header ? header[c] : "x" + std::to_string(out.feature_names.size()));
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& [line_no, cells] = rows[r];
    const std::string where = source + ": row " + std::to_string(line_no);
    if (cells.size() != width) {
      throw Error(ErrorKind::parse, where + ": expected " + std::to_string(width) + " columns, got " +
                                        std::to_string(cells.size()));
    }
    std::size_t f = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const auto value = parse_number(cells[c]);
      if (!value || !std::isfinite(*value)) {
        throw Error(ErrorKind::parse, where + ", column " + std::to_string(c + 1) + ": non-numeric value '" +
                                          cells[c] + "'");
      }
      if (label_col && c == *label_col) {
        if (*value != 0.0 && *value != 1.0) {
          throw Error(ErrorKind::parse, where + ", column " + std::to_string(c + 1) + ": label '" + cells[c] +
                                            "' is not 0 or 1");
        }
        out.labels[r] = static_cast<std::uint8_t>(*value);
      } else {
        out.features(r, f++) = *value;
      }
    }
  }
  return out;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  if (!fs::exists(path)) throw Error(ErrorKind::io, "data file not found: " + path);
  return parse_csv(read_file(path), options, path);
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  for (std::size_t c = 0; c < data.dim(); ++c) {
    if (c) out << ',';
    out << (c < data.feature_names.size() ? data.feature_names[c] : "x" + std::to_string(c));
  }
  if (data.labeled()) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    auto row = data.features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    if (data.labeled()) out << ',' << static_cast<int>(data.labels[r]);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "failed writing " + path);
}

// --- normalization ---------------------------------------------------------------

NormStats fit_normalizer(const Matrix& rows) {
  if (rows.rows() == 0) throw Error(ErrorKind::config, "cannot fit normalization on zero rows");
  NormStats s;
  s.input_dim = rows.cols();
  const double n = static_cast<double>(rows.rows());
  for (std::size_t c = 0; c < rows.cols(); ++c) {
    bool constant = true;
    double sum = 0.0;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      sum += rows(r, c);
      constant = constant && rows(r, c) == rows(0, c);
    }
    if (constant) {
      s.dropped.push_back(c);
      continue;
    }
    const double mu = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < rows.rows(); ++r) ss += (rows(r, c) - mu) * (rows(r, c) - mu);
    s.kept.push_back(c);
    s.mean.push_back(mu);
    s.stddev.push_back(std::sqrt(ss / n));
  }
  if (s.kept.empty()) throw Error(ErrorKind::config, "every feature has zero standard deviation");
  return s;
}

Matrix NormStats::apply(const Matrix& raw) const {
  if (raw.cols() != input_dim) {
    throw Error(ErrorKind::shape, "normalization expects " + std::to_string(input_dim) + " features, got " +
                                      std::to_string(raw.cols()));
  }
  Matrix out(raw.rows(), kept.size());
  for (std::size_t r = 0; r < raw.rows(); ++r)
    for (std::size_t j = 0; j < kept.size(); ++j) out(r, j) = (raw(r, kept[j]) - mean[j]) / stddev[j];
  return out;
}

namespace {

Dataset apply_stats(const Dataset& d, const NormStats& s) {
  Dataset out;
  out.features = s.apply(d.features);
  out.labels = d.labels;
  for (std::size_t c : s.kept)
    out.feature_names.push_back(c < d.feature_names.size() ? d.feature_names[c] : "x" + std::to_string(c));
  return out;
}

}  // namespace

Normalized preprocess(const Dataset& train, const Dataset& test) {
  if (train.dim() != test.dim()) {
    throw Error(ErrorKind::shape, "train has " + std::to_string(train.dim()) + " features, test has " +
                                      std::to_string(test.dim()));
  }
  Normalized out;
  out.stats = fit_normalizer(train.features);
  out.train = apply_stats(train, out.stats);
  out.test = apply_stats(test, out.stats);
  return out;
}

// --- splitting -------------------------------------------------------------------

std::size_t labeled_budget(const SplitSpec& spec, std::size_t train_anomalies) {
  if (spec.labeled_count) return *spec.labeled_count;
  const double ratio = spec.labeled_ratio.value_or(0.05);
  if (ratio < 0.0 || ratio > 1.0) throw Error(ErrorKind::config, "labeled_ratio must be in [0, 1]");
  const auto m = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(train_anomalies)));
  return std::max<std::size_t>(m, train_anomalies > 0 ? 1 : 0);
}

namespace {

// Largest r with r / (normals + r) <= cap.
std::size_t contamination_allowance(double cap, std::size_t normals, std::size_t available) {
  if (cap >= 1.0) return available;
  if (cap <= 0.0) return 0;
  auto r = static_cast<std::size_t>(std::floor(cap * static_cast<double>(normals) / (1.0 - cap)));
  while (r > 0 && static_cast<double>(r) > cap * static_cast<double>(normals + r)) --r;
  return r;
}

}  // namespace

PreparedData split(const Dataset& data, const SplitSpec& spec) {
  if (!data.labeled()) throw Error(ErrorKind::config, "split needs a labeled dataset");
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw Error(ErrorKind::config, "test_fraction must lie in (0, 1)");
  }
  if (!(spec.contamination_cap >= 0.0 && spec.contamination_cap <= 1.0)) {
    throw Error(ErrorKind::config, "contamination_cap must lie in [0, 1]");
  }
  const std::size_t n = data.rows();
  Rng rng = make_rng(spec.seed, streams::split);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
  std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train_anomalies, train_normals;
  for (std::size_t i = n_test; i < n; ++i) {
    (data.labels[order[i]] ? train_anomalies : train_normals).push_back(order[i]);
  }

  const std::size_t m = labeled_budget(spec, train_anomalies.size());
  if (m > train_anomalies.size()) {
    throw Error(ErrorKind::config, "labeled anomaly budget " + std::to_string(m) + " exceeds the " +
                                       std::to_string(train_anomalies.size()) + " anomalies in the training split");
  }
  const std::size_t available = train_anomalies.size() - m;
  const std::size_t allowed = contamination_allowance(spec.contamination_cap, train_normals.size(), available);
  if (spec.exact_contamination && spec.contamination_cap > 0.0 &&
      (spec.contamination_cap >= 1.0 || allowed > available)) {
    throw Error(ErrorKind::config, "contamination " + format_double(spec.contamination_cap) + " needs " +
                                       std::to_string(allowed) + " hidden anomalies, only " +
                                       std::to_string(available) + " available");
  }
  const std::size_t retained = std::min(allowed, available);

  PreparedData out;
  out.anomaly_rows.assign(train_anomalies.begin(), train_anomalies.begin() + static_cast<std::ptrdiff_t>(m));
  out.unlabeled_rows = train_normals;
  out.unlabeled_rows.insert(out.unlabeled_rows.end(), train_anomalies.begin() + static_cast<std::ptrdiff_t>(m),
                            train_anomalies.begin() + static_cast<std::ptrdiff_t>(m + retained));
  out.unlabeled_anomalies = retained;
  std::sort(out.unlabeled_rows.begin(), out.unlabeled_rows.end());
  std::sort(out.anomaly_rows.begin(), out.anomaly_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  out.test_rows = test_rows;

  out.unlabeled = data.features.gather_rows(out.unlabeled_rows);
  out.anomalies = data.features.gather_rows(out.anomaly_rows);
  out.test = data.subset(test_rows);
  return out;
}

void normalize(PreparedData& prepared, const Dataset& original, NormSource source) {
  std::vector<std::size_t> rows;
  if (source == NormSource::all) {
    rows.resize(original.rows());
    std::iota(rows.begin(), rows.end(), 0);
  } else {
    rows = prepared.unlabeled_rows;
    rows.insert(rows.end(), prepared.anomaly_rows.begin(), prepared.anomaly_rows.end());
    std::sort(rows.begin(), rows.end());
  }
  prepared.stats = fit_normalizer(original.features.gather_rows(rows));
  prepared.unlabeled = prepared.stats.apply(prepared.unlabeled);
  prepared.anomalies = prepared.stats.apply(prepared.anomalies);
  prepared.test = apply_stats(prepared.test, prepared.stats);
}

PreparedData prepare(const Dataset& data, const SplitSpec& spec, NormSource source) {
  PreparedData p = split(data, spec);
  normalize(p, data, source);
  return p;
}

// --- persistence -----------------------------------------------------------------

namespace {

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

template <class T>
std::vector<T> split_list(const std::string& s, const std::string& key) {
  std::vector<T> out;
  if (s.empty()) return out;
  for (const auto& cell : split_fields(s)) {
    const auto v = parse_number(cell);
    if (!v) throw Error(ErrorKind::parse, "prepared metadata: bad value in '" + key + "'");
    out.push_back(static_cast<T>(*v));
  }
  return out;
}

Dataset pool_dataset(const Matrix& m, const std::vector<std::string>& names) {
  Dataset d;
  d.features = m;
  d.feature_names = names;
  return d;
}

}  // namespace

void save_prepared(const std::string& dir, const PreparedData& p) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create directory " + dir + ": " + ec.message());
  write_csv(dir + "/unlabeled.csv", pool_dataset(p.unlabeled, p.test.feature_names));
  write_csv(dir + "/anomalies.csv", pool_dataset(p.anomalies, p.test.feature_names));
  write_csv(dir + "/test.csv", p.test);

  std::ofstream meta(dir + "/stats.txt", std::ios::trunc);
  if (!meta) throw Error(ErrorKind::io, "cannot write " + dir + "/stats.txt");
  meta << "format=setad-prepared-1\n";
  meta << "input_dim=" << p.stats.input_dim << '\n';
  meta << "kept=" << join(p.stats.kept) << '\n';
  meta << "dropped=" << join(p.stats.dropped) << '\n';
  meta << "mean=" << join(p.stats.mean) << '\n';
  meta << "stddev=" << join(p.stats.stddev) << '\n';
  meta << "unlabeled_rows=" << join(p.unlabeled_rows) << '\n';
  meta << "anomaly_rows=" << join(p.anomaly_rows) << '\n';
  meta << "test_rows=" << join(p.test_rows) << '\n';
  meta << "unlabeled_anomalies=" << p.unlabeled_anomalies << '\n';
}

PreparedData load_prepared(const std::string& dir) {
  std::map<std::string, std::string> kv;
  {
    std::istringstream in(read_file(dir + "/stats.txt"));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  if (kv["format"] != "setad-prepared-1") throw Error(ErrorKind::parse, dir + ": unknown prepared-data format");

  PreparedData p;
  p.stats.input_dim = split_list<std::size_t>(kv["input_dim"], "input_dim").at(0);
  p.stats.kept = split_list<std::size_t>(kv["kept"], "kept");
  p.stats.dropped = split_list<std::size_t>(kv["dropped"], "dropped");
  p.stats.mean = split_list<double>(kv["mean"], "mean");
  p.stats.stddev = split_list<double>(kv["stddev"], "stddev");
  p.unlabeled_rows = split_list<std::size_t>(kv["unlabeled_rows"], "unlabeled_rows");
  p.anomaly_rows = split_list<std::size_t>(kv["anomaly_rows"], "anomaly_rows");
  p.test_rows = split_list<std::size_t>(kv["test_rows"], "test_rows");
  p.unlabeled_anomalies = split_list<std::size_t>(kv["unlabeled_anomalies"], "unlabeled_anomalies").at(0);

  CsvOptions unlabeled_csv;
  unlabeled_csv.unlabeled = true;
  p.unlabeled = load_csv(dir + "/unlabeled.csv", unlabeled_csv).features;
  p.anomalies = load_csv(dir + "/anomalies.csv", unlabeled_csv).features;
  p.test = load_csv(dir + "/test.csv");
  return p;
}

// --- synthetic data --------------------------------------------------------------

Dataset synth_blobs(std::size_t n_normal, std::size_t n_anomaly, std::size_t dim, double separation,
                    std::uint64_t seed) {
  if (dim < 1) throw Error(ErrorKind::config, "synthetic data needs dim >= 1");
  if (separation < 0.0) throw Error(ErrorKind::config, "separation must be >= 0");
  Rng rng = make_rng(seed, streams::synth);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Dataset out;
  out.features = Matrix(n_normal + n_anomaly, dim);
  out.labels.assign(n_normal + n_anomaly, 0);
  for (std::size_t c = 0; c < dim; ++c) out.feature_names.push_back("x" + std::to_string(c));

  for (std::size_t r = 0; r < n_normal; ++r)
    for (double& v : out.features.row(r)) v = gauss(rng);

  const double root_d = std::sqrt(static_cast<double>(dim));
  const double inner = separation * root_d;
  const double outer = (separation + 1.0) * root_d;
  const double ratio_pow = std::pow(inner / outer, static_cast<double>(dim));
  for (std::size_t r = n_normal; r < n_normal + n_anomaly; ++r) {
    auto row = out.features.row(r);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : row) {
        v = gauss(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    // Volume-uniform radius: r^d uniform in [inner^d, outer^d].
    const double u = unit(rng);
    const double radius = outer * std::pow(ratio_pow + u * (1.0 - ratio_pow), 1.0 / static_cast<double>(dim));
    for (double& v : row) v *= radius / norm;
    out.labels[r] = 1;
  }
  return out;
}

}  // namespace setad::data
