#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "setad/data.hpp"
#include "setad/encoder.hpp"
#include "setad/error.hpp"
#include "setad/metrics.hpp"
#include "setad/scorer.hpp"
#include "setad/trainer.hpp"

namespace py = pybind11;
using setad::numcore::Matrix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  const auto buf = a.request();
  if (buf.ndim == 1) {
    const auto n = static_cast<std::size_t>(buf.shape[0]);
    const auto* p = static_cast<const double*>(buf.ptr);
    return Matrix(1, n, std::vector<double>(p, p + n));
  }
  if (buf.ndim != 2) throw setad::Error(setad::ErrorKind::shape, "expected a 1-D or 2-D array");
  const auto r = static_cast<std::size_t>(buf.shape[0]);
  const auto c = static_cast<std::size_t>(buf.shape[1]);
  const auto* p = static_cast<const double*>(buf.ptr);
  return Matrix(r, c, std::vector<double>(p, p + r * c));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::vector<std::uint8_t> to_labels(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(a.size()));
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    const auto v = a.data()[i];
    if (v != 0 && v != 1) throw setad::Error(setad::ErrorKind::parse, "labels must be 0 or 1");
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

setad::data::Dataset to_dataset(const Array& x, const py::object& y) {
  setad::data::Dataset d;
  d.features = to_matrix(x);
  if (!y.is_none()) {
    d.labels = to_labels(y.cast<py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>>());
    if (d.labels.size() != d.features.rows()) {
      throw setad::Error(setad::ErrorKind::shape, "label count does not match row count");
    }
  }
  return d;
}

py::array_t<std::int64_t> labels_array(const std::vector<std::uint8_t>& labels) {
  py::array_t<std::int64_t> out(static_cast<py::ssize_t>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) out.mutable_data()[i] = labels[i];
  return out;
}

setad::encoder::Pooling parse_pooling(const std::string& s) {
  if (s == "sum") return setad::encoder::Pooling::sum;
  if (s == "max") return setad::encoder::Pooling::max;
  throw setad::Error(setad::ErrorKind::config, "pooling must be 'sum' or 'max'");
}

py::dict eval_dict(const setad::metrics::EvalResult& m) {
  py::dict d;
  d["auc_roc"] = m.auc_roc;
  d["auc_pr"] = m.auc_pr;
  d["n_pos"] = m.n_pos;
  d["n_neg"] = m.n_neg;
  return d;
}

}  // namespace

PYBIND11_MODULE(_setad, m) {
  m.doc() = "Set-level graded anomaly detection core";

  static py::exception<setad::Error> error_type(m, "SetadError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const setad::Error& e) {
      py::object err = error_type;
      py::object instance = err(std::string(e.what()));
      instance.attr("category") = setad::to_string(e.kind());
      PyErr_SetObject(error_type.ptr(), instance.ptr());
    }
  });

  using setad::encoder::ModelParams;
  py::class_<ModelParams>(m, "Model")
      .def_property_readonly("input_dim", [](const ModelParams& p) { return p.shape.input_dim; })
      .def_property_readonly("latent_dim", [](const ModelParams& p) { return p.shape.latent_dim; })
      .def_property_readonly("heads", [](const ModelParams& p) { return p.shape.heads; })
      .def_property_readonly("depth", [](const ModelParams& p) { return p.shape.depth; })
      .def_property_readonly("pooling", [](const ModelParams& p) {
        return p.shape.pooling == setad::encoder::Pooling::max ? "max" : "sum";
      })
      .def("score_set", [](const ModelParams& p, const Array& points) { return setad::encoder::score_set(p, to_matrix(points)); },
           py::arg("points"), "Raw set score for a k×d array.")
      .def("embed", [](const ModelParams& p, const Array& x) {
             const Matrix row = to_matrix(x);
             return to_array(setad::encoder::embed(p, row.row(0)));
           })
      .def("weights", [](const ModelParams& p) {
             py::dict out;
             setad::encoder::for_each_block(p.weights, [&](const std::string& name, const Matrix& block, bool) {
               out[py::str(name)] = to_array(block);
             });
             return out;
           })
      .def("to_bytes", [](const ModelParams& p) {
             const auto bytes = setad::encoder::serialize(p);
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           })
      .def_static("from_bytes", [](const py::bytes& b) {
             const std::string s = b;
             return setad::encoder::deserialize(
                 std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
           })
      .def("save", [](const ModelParams& p, const std::string& path) { setad::encoder::save_model(path, p); })
      .def_static("load", &setad::encoder::load_model)
      .def("hash", &setad::encoder::model_hash)
      .def("__eq__", [](const ModelParams& a, const ModelParams& b) { return a == b; });

  m.def(
      "init_params",
      [](std::uint64_t seed, std::size_t input_dim, std::size_t latent_dim, std::size_t heads, std::size_t depth,
         const std::string& pooling) {
        setad::encoder::ModelShape shape;
        shape.input_dim = input_dim;
        shape.latent_dim = latent_dim;
        shape.heads = heads;
        shape.depth = depth;
        shape.pooling = parse_pooling(pooling);
        return setad::encoder::init_params(seed, shape);
      },
      py::arg("seed"), py::arg("input_dim"), py::arg("latent_dim") = 20, py::arg("heads") = 2, py::arg("depth") = 1,
      py::arg("pooling") = "sum");

  m.def(
      "train",
      [](const Array& unlabeled, const Array& anomalies, std::uint64_t seed, std::size_t set_size,
         std::size_t latent_dim, std::size_t heads, std::size_t epochs, std::size_t batches_per_epoch,
         std::size_t batch_size, double learning_rate, double weight_decay, const std::string& loss,
         const std::string& pooling) {
        setad::trainer::Hyperparams hp;
        hp.seed = seed;
        hp.set_size = set_size;
        hp.latent_dim = latent_dim;
        hp.heads = heads;
        hp.epochs = epochs;
        hp.batches_per_epoch = batches_per_epoch;
        hp.batch_size = batch_size;
        hp.learning_rate = learning_rate;
        hp.weight_decay = weight_decay;
        hp.pooling = parse_pooling(pooling);
        if (loss == "mae") {
          hp.loss = setad::trainer::LossKind::mae;
        } else if (loss == "mse") {
          hp.loss = setad::trainer::LossKind::mse;
        } else {
          throw setad::Error(setad::ErrorKind::config, "loss must be 'mae' or 'mse'");
        }
        const Matrix u = to_matrix(unlabeled);
        const Matrix a = to_matrix(anomalies);
        setad::trainer::TrainResult r;
        {
          py::gil_scoped_release release;
          r = setad::trainer::train(u, a, hp);
        }
        py::list history;
        for (const auto& e : r.history) history.append(py::make_tuple(e.epoch, e.mean_loss));
        py::dict out;
        out["model"] = r.model;
        out["final_model"] = r.final_model;
        out["history"] = history;
        out["best_epoch"] = r.best_epoch;
        return out;
      },
      py::arg("unlabeled"), py::arg("anomalies"), py::arg("seed") = 0, py::arg("set_size") = 8,
      py::arg("latent_dim") = 20, py::arg("heads") = 2, py::arg("epochs") = 20, py::arg("batches_per_epoch") = 20,
      py::arg("batch_size") = 64, py::arg("learning_rate") = 1e-3, py::arg("weight_decay") = 0.1,
      py::arg("loss") = "mae", py::arg("pooling") = "sum");

  m.def(
      "score",
      [](const ModelParams& model, const Array& test, const Array& pool, const py::object& labels, std::uint64_t seed,
         std::size_t set_size, std::size_t n_contexts, std::size_t n_refs, bool exhaustive_refs, bool exclude_context,
         std::size_t threads) {
        setad::scorer::ScoringOptions o;
        o.seed = seed;
        o.set_size = set_size;
        o.n_contexts = n_contexts;
        o.n_refs = n_refs;
        o.exhaustive_refs = exhaustive_refs;
        o.exclude_context = exclude_context;
        o.threads = threads;
        const auto data = to_dataset(test, labels);
        const Matrix p = to_matrix(pool);
        setad::scorer::ScoreReport report;
        {
          py::gil_scoped_release release;
          report = setad::scorer::score_dataset(model, data, p, o);
        }
        py::array_t<double> scores(static_cast<py::ssize_t>(report.points.size()));
        for (std::size_t i = 0; i < report.points.size(); ++i) scores.mutable_data()[i] = report.points[i].score;
        py::dict out;
        out["scores"] = scores;
        out["model_hash"] = report.model_hash;
        out["metrics"] = report.metrics ? py::object(eval_dict(*report.metrics)) : py::object(py::none());
        std::ostringstream json;
        setad::scorer::write_report(json, report);
        out["report_json"] = json.str();
        return out;
      },
      py::arg("model"), py::arg("test"), py::arg("pool"), py::arg("labels") = py::none(), py::arg("seed") = 1,
      py::arg("set_size") = 8, py::arg("n_contexts") = 60, py::arg("n_refs") = 30, py::arg("exhaustive_refs") = false,
      py::arg("exclude_context") = true, py::arg("threads") = 1);

  m.def(
      "auc_roc",
      [](const std::vector<double>& scores, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& y) {
        return setad::metrics::auc_roc(scores, to_labels(y));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "auc_pr",
      [](const std::vector<double>& scores, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& y) {
        return setad::metrics::auc_pr(scores, to_labels(y));
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "synth_blobs",
      [](std::size_t n_normal, std::size_t n_anomaly, std::size_t dim, double separation, std::uint64_t seed) {
        const auto d = setad::data::synth_blobs(n_normal, n_anomaly, dim, separation, seed);
        return py::make_tuple(to_array(d.features), labels_array(d.labels));
      },
      py::arg("n_normal") = 2000, py::arg("n_anomaly") = 40, py::arg("dim") = 10, py::arg("separation") = 4.0,
      py::arg("seed") = 0);

  m.def(
      "load_csv",
      [](const std::string& path, const std::string& label_column, bool unlabeled) {
        setad::data::CsvOptions o;
        o.label_column = label_column;
        o.unlabeled = unlabeled;
        const auto d = setad::data::load_csv(path, o);
        return py::make_tuple(to_array(d.features), d.labeled() ? py::object(labels_array(d.labels)) : py::object(py::none()));
      },
      py::arg("path"), py::arg("label_column") = "", py::arg("unlabeled") = false);

  m.def(
      "prepare",
      [](const Array& x, const py::object& y, std::uint64_t seed, double test_fraction,
         std::optional<std::size_t> labeled_count, std::optional<double> labeled_ratio, double contamination_cap,
         bool exact_contamination, const std::string& norm_stats) {
        setad::data::SplitSpec spec;
        spec.seed = seed;
        spec.test_fraction = test_fraction;
        spec.labeled_count = labeled_count;
        spec.labeled_ratio = labeled_ratio;
        spec.contamination_cap = contamination_cap;
        spec.exact_contamination = exact_contamination;
        setad::data::NormSource src = setad::data::NormSource::train;
        if (norm_stats == "all") {
          src = setad::data::NormSource::all;
        } else if (norm_stats != "train") {
          throw setad::Error(setad::ErrorKind::config, "norm_stats must be 'train' or 'all'");
        }
        const auto p = setad::data::prepare(to_dataset(x, y), spec, src);
        py::dict out;
        out["unlabeled"] = to_array(p.unlabeled);
        out["anomalies"] = to_array(p.anomalies);
        out["test"] = to_array(p.test.features);
        out["test_labels"] = labels_array(p.test.labels);
        out["unlabeled_rows"] = p.unlabeled_rows;
        out["anomaly_rows"] = p.anomaly_rows;
        out["test_rows"] = p.test_rows;
        out["unlabeled_anomalies"] = p.unlabeled_anomalies;
        out["mean"] = p.stats.mean;
        out["std"] = p.stats.stddev;
        out["dropped"] = p.stats.dropped;
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("seed") = 0, py::arg("test_fraction") = 0.2,
      py::arg("labeled_count") = py::none(), py::arg("labeled_ratio") = py::none(), py::arg("contamination_cap") = 0.02,
      py::arg("exact_contamination") = false, py::arg("norm_stats") = "train");
}
