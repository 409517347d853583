// Python bindings for the main pipeline operations: scenario generation,
// featurizer fitting, featurization, training, packing, inference, metrics.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <canbnn/bitvec.hpp>
#include <canbnn/bnn.hpp>
#include <canbnn/error.hpp>
#include <canbnn/featurizer.hpp>
#include <canbnn/frame.hpp>
#include <canbnn/metrics.hpp>
#include <canbnn/packed.hpp>
#include <canbnn/parser.hpp>
#include <canbnn/traffic_gen.hpp>

namespace py = pybind11;
using namespace canbnn;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using I32Array = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

TaskMode mode_from_string(const std::string& s) {
    if (s == "binary") return TaskMode::binary;
    if (s == "multiclass") return TaskMode::multiclass;
    throw ConfigError("mode must be 'binary' or 'multiclass', got '" + s + "'");
}

std::string mode_to_string(TaskMode m) {
    return m == TaskMode::binary ? "binary" : "multiclass";
}

std::vector<CanFrame> frames_from_csv(const std::string& csv_text) {
    std::istringstream in(csv_text);
    return parse_canonical(in, {});
}

// features bit matrix {0,1} -> BitVector row r.
BitVector row_bits(const U8Array& x, py::ssize_t r) {
    const auto cols = x.shape(1);
    BitVector bits(static_cast<std::size_t>(cols));
    const std::uint8_t* p = x.data(r, 0);
    for (py::ssize_t c = 0; c < cols; ++c)
        bits.set(static_cast<std::size_t>(c), p[c] != 0);
    return bits;
}

Matrix pm1_matrix(const U8Array& x) {
    if (x.ndim() != 2) throw ConfigError("feature array must be 2-D");
    Matrix m(static_cast<std::size_t>(x.shape(0)), static_cast<std::size_t>(x.shape(1)));
    const std::uint8_t* p = x.data();
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = p[i] ? 1.0 : -1.0;
    return m;
}

py::array_t<double> matrix_to_array(const Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

Dataset gather_rows(const Matrix& x, const std::vector<int>& y,
                    const std::vector<std::size_t>& idx) {
    Dataset d;
    d.x.resize(idx.size(), x.cols);
    d.y.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(x.row(idx[r]), x.cols, d.x.row(r));
        d.y[r] = y[idx[r]];
    }
    return d;
}

// Owns the packed model and a ready evaluator; the evaluator holds a
// pointer to the model so the pair must never be copied apart.
class Packed {
public:
    explicit Packed(PackedModel model) : model_(std::move(model)), eval_(model_) {}
    Packed(const Packed&) = delete;
    Packed& operator=(const Packed&) = delete;

    const PackedModel& model() const { return model_; }

    py::array_t<double> probabilities(const U8Array& x) {
        if (x.ndim() != 2) throw ConfigError("feature array must be 2-D");
        if (static_cast<std::size_t>(x.shape(1)) != model_.input_width())
            throw ConfigError("feature width mismatch");
        const py::ssize_t n = x.shape(0);
        const std::size_t out_w = model_.output_width();
        py::array_t<double> out({static_cast<std::size_t>(n), out_w});
        for (py::ssize_t r = 0; r < n; ++r) {
            const std::vector<double> p = eval_.probabilities(row_bits(x, r));
            std::copy(p.begin(), p.end(), out.mutable_data(r, 0));
        }
        return out;
    }

    py::array_t<double> logits(const U8Array& x) {
        if (x.ndim() != 2) throw ConfigError("feature array must be 2-D");
        const py::ssize_t n = x.shape(0);
        const std::size_t out_w = model_.output_width();
        py::array_t<double> out({static_cast<std::size_t>(n), out_w});
        for (py::ssize_t r = 0; r < n; ++r) {
            const std::span<const double> z = eval_.infer(row_bits(x, r));
            std::copy(z.begin(), z.end(), out.mutable_data(r, 0));
        }
        return out;
    }

private:
    PackedModel model_;
    PackedEvaluator eval_;
};

std::string generate_csv(const std::string& preset, const std::string& config_text,
                         std::optional<std::uint64_t> seed) {
    if (preset.empty() == config_text.empty())
        throw ConfigError("pass exactly one of preset / config_text");
    ScenarioConfig cfg = preset.empty() ? ScenarioConfig::parse_text(config_text)
                                        : ScenarioConfig::preset(preset, seed.value_or(0));
    if (seed) cfg.seed = *seed;
    const std::vector<CanFrame> frames = generate(cfg);
    std::ostringstream out;
    write_canonical(out, frames);
    return out.str();
}

std::string fit_featurizer(const std::string& csv_text, int bit_width, double q_low,
                           double q_high) {
    const std::vector<CanFrame> frames = frames_from_csv(csv_text);
    std::vector<CanFrame> benign;
    for (const CanFrame& f : frames)
        if (f.label && *f.label == 0) benign.push_back(f);
    if (benign.empty()) throw DataError("no benign-labeled frames to fit on");

    FeaturizerConfig cfg;
    cfg.bit_width = bit_width;
    cfg.q_low = q_low;
    cfg.q_high = q_high;
    std::tie(cfg.thres1, cfg.thres2) = fit_thresholds(benign, q_low, q_high);
    cfg.id_codes = IdDictionary::build(benign, bit_width).sorted_pairs();
    return cfg.to_json();
}

py::tuple featurize(const std::string& csv_text, const std::string& featurizer_json) {
    const FeaturizerConfig cfg = FeaturizerConfig::from_json(featurizer_json);
    const IdDictionary dict = cfg.dictionary();
    IntervalEncoder enc = cfg.interval_encoder();
    const std::vector<CanFrame> frames = frames_from_csv(csv_text);
    const std::vector<FeatureVector> feats = featurize_stream(frames, dict, enc);

    const std::size_t width = cfg.feature_width();
    py::array_t<std::uint8_t> x({feats.size(), width});
    py::array_t<std::int32_t> y(static_cast<py::ssize_t>(feats.size()));
    auto* yp = y.mutable_data();
    for (std::size_t r = 0; r < feats.size(); ++r) {
        auto* xp = x.mutable_data(r, 0);
        for (std::size_t c = 0; c < width; ++c) xp[c] = feats[r].bits.get(c) ? 1 : 0;
        yp[r] = feats[r].label ? static_cast<std::int32_t>(*feats[r].label) : -1;
    }
    return py::make_tuple(std::move(x), std::move(y));
}

py::dict train_from_features(const U8Array& x_arr, const I32Array& y_arr,
                             const std::string& mode_name, const std::vector<int>& hidden,
                             int epochs, int batch_size, double learning_rate,
                             double dropout, std::uint64_t seed,
                             std::tuple<double, double, double> split) {
    if (x_arr.ndim() != 2 || y_arr.ndim() != 1) throw ConfigError("expected X[n,d], y[n]");
    if (x_arr.shape(0) != y_arr.shape(0)) throw DataError("X and y row counts differ");
    const TaskMode mode = mode_from_string(mode_name);

    const Matrix x = pm1_matrix(x_arr);
    std::vector<int> y(y_arr.data(), y_arr.data() + y_arr.shape(0));
    for (int& v : y) {
        if (v < 0) throw DataError("training requires labeled rows");
        if (mode == TaskMode::binary && v > 1) v = 1;
    }

    int n_out = 1;
    if (mode == TaskMode::multiclass)
        n_out = *std::max_element(y.begin(), y.end()) + 1;

    std::vector<int> topology = {static_cast<int>(x.cols)};
    topology.insert(topology.end(), hidden.begin(), hidden.end());
    topology.push_back(n_out);

    const auto [f_train, f_val, f_test] = split;
    const SplitIndices idx = stratified_split(y, f_train, f_val, f_test, seed);
    const Dataset train_set = gather_rows(x, y, idx.train);
    const Dataset val_set = gather_rows(x, y, idx.val);

    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = learning_rate;
    cfg.dropout_rate = dropout;
    cfg.seed = seed;
    const BnnModel init = BnnModel::init(topology, mode, dropout, seed);
    const TrainResult res = train(init, train_set, val_set, cfg);

    py::list log;
    for (const EpochLog& e : res.log) {
        py::dict d;
        d["epoch"] = e.epoch;
        d["train_loss"] = e.train_loss;
        d["val_loss"] = e.val_loss;
        d["learning_rate"] = e.learning_rate;
        d["elapsed_s"] = e.elapsed_s;
        log.append(std::move(d));
    }
    py::dict out;
    out["checkpoint"] = py::bytes(res.model.serialize());
    out["best_epoch"] = res.best_epoch;
    out["best_val_loss"] = res.best_val_loss;
    out["events"] = res.events;
    out["log"] = std::move(log);
    out["test_indices"] = idx.test;
    return out;
}

py::dict evaluate_metrics(const I32Array& pred, const I32Array& truth, int n_classes) {
    std::vector<int> p(pred.data(), pred.data() + pred.shape(0));
    std::vector<int> t(truth.data(), truth.data() + truth.shape(0));
    const Metrics m = evaluate(p, t, static_cast<std::size_t>(n_classes));

    py::list confusion;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n_classes); ++i) {
        py::list row;
        for (std::size_t j = 0; j < static_cast<std::size_t>(n_classes); ++j)
            row.append(m.at(i, j));
        confusion.append(std::move(row));
    }
    py::dict out;
    out["accuracy"] = m.accuracy;
    out["precision"] = m.precision;
    out["recall"] = m.recall;
    out["f1"] = m.f1;
    out["confusion"] = std::move(confusion);
    out["warnings"] = m.warnings;
    return out;
}

BnnModel model_from_bytes(const py::bytes& blob) {
    std::istringstream in(static_cast<std::string>(blob));
    return BnnModel::load(in);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Binarized neural network CAN intrusion detection core";
    m.attr("__version__") = "1.0.0";
    m.attr("FEATURE_BITS_PAYLOAD") = kPayloadBits;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    m.def("generate_csv", &generate_csv, py::arg("preset") = "",
          py::arg("config_text") = "", py::arg("seed") = py::none(),
          "Generate a labeled scenario and return it as canonical CSV text.");
    m.def("fit_featurizer", &fit_featurizer, py::arg("csv_text"), py::arg("bit_width") = 6,
          py::arg("q_low") = 0.01, py::arg("q_high") = 0.99,
          "Fit ID dictionary and interval thresholds on the benign frames of the "
          "given canonical CSV; returns the featurizer config as JSON.");
    m.def("featurize", &featurize, py::arg("csv_text"), py::arg("featurizer_json"),
          "Featurize canonical CSV text; returns (X uint8 [n,width], y int32 [n], "
          "-1 where unlabeled).");
    m.def("train", &train_from_features, py::arg("x"), py::arg("y"),
          py::arg("mode") = "binary", py::arg("hidden") = std::vector<int>{128, 128, 128},
          py::arg("epochs") = 100, py::arg("batch_size") = 256,
          py::arg("learning_rate") = 1e-3, py::arg("dropout") = 0.2, py::arg("seed") = 0,
          py::arg("split") = std::make_tuple(0.7, 0.15, 0.15),
          "Train on featurized rows; returns a dict with the checkpoint bytes, "
          "per-epoch log, events, and the held-out test row indices.");
    m.def("evaluate_metrics", &evaluate_metrics, py::arg("pred"), py::arg("truth"),
          py::arg("n_classes"),
          "Confusion-matrix metrics; binary reports the attack class, multiclass "
          "reports macro averages.");

    py::class_<BnnModel>(m, "Model")
        .def_static("from_bytes", &model_from_bytes, py::arg("blob"))
        .def_static("from_file",
                    [](const std::string& path) { return BnnModel::load(path); },
                    py::arg("path"))
        .def("to_bytes", [](const BnnModel& m_) { return py::bytes(m_.serialize()); })
        .def("save", [](const BnnModel& m_, const std::string& p) { m_.save(p); },
             py::arg("path"))
        .def_property_readonly("topology",
                               [](const BnnModel& m_) { return m_.topology; })
        .def_property_readonly("mode",
                               [](const BnnModel& m_) { return mode_to_string(m_.mode); })
        .def("predict_proba",
             [](const BnnModel& m_, const U8Array& x) {
                 return matrix_to_array(m_.predict_batch(pm1_matrix(x)));
             },
             py::arg("x"),
             "Reference (real-arithmetic) probabilities: [n,1] sigmoid in binary "
             "mode, [n,C] softmax rows in multiclass mode.");

    py::class_<Packed>(m, "PackedModel")
        .def_static("pack",
                    [](const BnnModel& model) {
                        return std::make_unique<Packed>(PackedModel::pack(model));
                    },
                    py::arg("model"))
        .def_static("from_bytes",
                    [](const py::bytes& blob) {
                        std::istringstream in(static_cast<std::string>(blob));
                        return std::make_unique<Packed>(PackedModel::load(in));
                    },
                    py::arg("blob"))
        .def_static("from_file",
                    [](const std::string& path) {
                        return std::make_unique<Packed>(PackedModel::load(path));
                    },
                    py::arg("path"))
        .def("to_bytes", [](const Packed& p) { return py::bytes(p.model().serialize()); })
        .def("save", [](const Packed& p, const std::string& path) { p.model().save(path); },
             py::arg("path"))
        .def_property_readonly("byte_size",
                               [](const Packed& p) { return p.model().byte_size(); })
        .def_property_readonly("topology",
                               [](const Packed& p) { return p.model().topology; })
        .def_property_readonly("mode",
                               [](const Packed& p) { return mode_to_string(p.model().mode); })
        .def("predict_proba", &Packed::probabilities, py::arg("x"),
             "Packed-path probabilities, bit-for-bit equivalent to the reference "
             "model's hidden activations.")
        .def("logits", &Packed::logits, py::arg("x"));
}
