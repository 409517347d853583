// canbnn: CAN-bus intrusion detection with a binarized neural network.
//
// Subcommands cover the full pipeline: synthetic traffic generation,
// featurizer fitting, training, bit-packing, evaluation, benchmarking, and
// batch detection. Every subcommand is deterministic under (--seed, inputs).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "canbnn/bnn.hpp"
#include "canbnn/error.hpp"
#include "canbnn/featurizer.hpp"
#include "canbnn/metrics.hpp"
#include "canbnn/packed.hpp"
#include "canbnn/parser.hpp"
#include "canbnn/traffic_gen.hpp"

namespace {

using namespace canbnn;

// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 internal error.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    return out;
}

std::vector<CanFrame> load_data(const std::string& path, const std::string& format,
                                const std::string& labels_path) {
    std::optional<LabelManifest> manifest;
    if (!labels_path.empty()) manifest = LabelManifest::load(labels_path);
    return load_frames(path, format_from_name(format),
                       manifest ? &*manifest : nullptr);
}

std::vector<FeatureVector> featurize_with(const FeaturizerConfig& cfg,
                                          std::span<const CanFrame> frames) {
    const IdDictionary dict = cfg.dictionary();
    IntervalEncoder encoder = cfg.interval_encoder();
    return featurize_stream(frames, dict, encoder);
}

void require_hash_match(std::uint64_t model_hash, const FeaturizerConfig& cfg,
                        const char* what) {
    if (model_hash != cfg.content_hash())
        throw DataError(std::string(what) +
                        " was built with a different featurizer config (hash mismatch); "
                        "refusing to mix encodings");
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::string preset = "combined";
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_path;
    std::string manifest_out;
};

int cmd_generate(const GenerateArgs& args) {
    ScenarioConfig cfg = args.config_path.empty()
                             ? ScenarioConfig::preset(args.preset, args.seed)
                             : ScenarioConfig::load(args.config_path);
    if (!args.config_path.empty() && args.seed_given) cfg.seed = args.seed;

    const std::vector<CanFrame> frames = generate(cfg);
    save_canonical(args.out_path, frames);
    if (!args.manifest_out.empty()) {
        std::ofstream out = open_out(args.manifest_out);
        out << "class=0:benign\nclass=1:flooding\nclass=2:fuzzing\nclass=3:spoofing\ndefault=0\n";
        if (!out) throw DataError("cannot write " + args.manifest_out);
    }
    std::fprintf(stderr, "generated %zu frames -> %s\n", frames.size(), args.out_path.c_str());
    return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
    std::string data_path;
    std::string format = "canonical";
    std::string labels_path;
    int bit_width = 6;
    double q_low = 0.01;
    double q_high = 0.99;
    double thres1 = 0.0;
    double thres2 = 0.0;
    bool explicit_thresholds = false;
    std::string out_path;
};

int cmd_fit(const FitArgs& args) {
    const std::vector<CanFrame> frames = load_data(args.data_path, args.format, args.labels_path);

    // The dictionary and thresholds describe normal bus behavior, so only
    // frames explicitly labeled benign participate.
    std::vector<CanFrame> benign;
    benign.reserve(frames.size());
    for (const CanFrame& f : frames)
        if (f.label && *f.label == 0) benign.push_back(f);
    if (benign.empty())
        throw DataError("no benign-labeled frames in " + args.data_path +
                        "; cannot fit a featurizer");

    FeaturizerConfig cfg;
    cfg.bit_width = args.bit_width;
    cfg.q_low = args.q_low;
    cfg.q_high = args.q_high;
    if (args.explicit_thresholds) {
        cfg.thres1 = args.thres1;
        cfg.thres2 = args.thres2;
    } else {
        std::tie(cfg.thres1, cfg.thres2) = fit_thresholds(benign, args.q_low, args.q_high);
    }
    const IdDictionary dict = IdDictionary::build(benign, args.bit_width);
    cfg.id_codes = dict.sorted_pairs();
    cfg.interval_encoder();  // validates thres1/thres2

    cfg.save(args.out_path);
    std::fprintf(stderr, "fitted featurizer: %zu IDs, thres1=%.6g s, thres2=%.6g s -> %s\n",
                 cfg.id_codes.size(), cfg.thres1, cfg.thres2, args.out_path.c_str());
    return kExitOk;
}

// ------------------------------------------------------------------- train

struct SplitArgs {
    double train = 0.7;
    double val = 0.15;
    double test = 0.15;
};

void parse_split(const std::string& text, SplitArgs& split) {
    if (text.empty()) return;
    double a, b, c;
    char extra;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf%c", &a, &b, &c, &extra) != 3)
        throw ConfigError("--split expects three comma-separated fractions");
    split = {a, b, c};
}

struct TrainArgs {
    std::string data_path;
    std::string format = "canonical";
    std::string labels_path;
    std::string featurizer_path;
    std::string mode = "binary";
    std::vector<int> hidden = {128, 128, 128};
    double lr = 1e-3;
    int epochs = 100;
    int batch_size = 256;
    double dropout = 0.2;
    std::uint64_t seed = 0;
    std::string split_text;
    std::string out_path;
    std::string log_path;
};

std::vector<int> collect_labels(std::span<const FeatureVector> features, TaskMode mode) {
    std::vector<int> labels;
    labels.reserve(features.size());
    for (const FeatureVector& f : features) {
        if (!f.label) throw DataError("dataset contains unlabeled frames; labels are required");
        int y = *f.label;
        if (mode == TaskMode::binary && y > 1) y = 1;
        labels.push_back(y);
    }
    return labels;
}

Dataset gather(const Matrix& x, std::span<const int> y, std::span<const std::size_t> idx) {
    Dataset d;
    d.x.resize(idx.size(), x.cols);
    d.y.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(x.row(idx[r]), x.cols, d.x.row(r));
        d.y.push_back(y[idx[r]]);
    }
    return d;
}

int cmd_train(const TrainArgs& args) {
    const TaskMode mode = [&] {
        if (args.mode == "binary") return TaskMode::binary;
        if (args.mode == "multi" || args.mode == "multiclass") return TaskMode::multiclass;
        throw ConfigError("--mode must be binary or multi");
    }();
    SplitArgs split;
    parse_split(args.split_text, split);

    const FeaturizerConfig cfg = FeaturizerConfig::load(args.featurizer_path);
    const std::vector<CanFrame> frames =
        load_data(args.data_path, args.format, args.labels_path);
    const std::vector<FeatureVector> features = featurize_with(cfg, frames);
    if (features.empty()) throw DataError("no frames to train on");

    const std::vector<int> labels = collect_labels(features, mode);
    int n_classes = 2;
    if (mode == TaskMode::multiclass) {
        n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
        if (n_classes < 2) n_classes = 2;
        if (n_classes == 2)
            std::fprintf(stderr, "warning: multiclass mode on binary-labeled data (C=2)\n");
    }

    const SplitIndices idx =
        stratified_split(labels, split.train, split.val, split.test, args.seed);
    const Matrix x = to_pm1_matrix(features);
    const Dataset train_set = gather(x, labels, idx.train);
    const Dataset val_set = gather(x, labels, idx.val);

    std::vector<int> topology;
    topology.push_back(static_cast<int>(cfg.feature_width()));
    for (int h : args.hidden) topology.push_back(h);
    topology.push_back(mode == TaskMode::binary ? 1 : n_classes);

    TrainConfig tc;
    tc.learning_rate = args.lr;
    tc.max_epochs = args.epochs;
    tc.batch_size = args.batch_size;
    tc.dropout_rate = args.dropout;
    tc.seed = args.seed;
    tc.validate();

    BnnModel model = BnnModel::init(topology, mode, args.dropout, args.seed);
    model.featurizer_hash = cfg.content_hash();
    TrainResult result = train(model, train_set, val_set, tc);
    result.model.featurizer_hash = cfg.content_hash();
    result.model.save(args.out_path);

    const std::string log_path =
        args.log_path.empty() ? args.out_path + ".log" : args.log_path;
    {
        std::ofstream log = open_out(log_path);
        write_training_log(log, result.log);
        for (const std::string& e : result.events) log << "# " << e << '\n';
        char buf[96];
        std::snprintf(buf, sizeof(buf), "# best_epoch %d best_val_loss %.6f\n",
                      result.best_epoch, result.best_val_loss);
        log << buf;
    }

    std::fprintf(stderr,
                 "trained %zu epochs (best %d, val loss %.6f) on %zu/%zu/%zu samples -> %s\n",
                 result.log.size(), result.best_epoch, result.best_val_loss, idx.train.size(),
                 idx.val.size(), idx.test.size(), args.out_path.c_str());
    for (const std::string& e : result.events) std::fprintf(stderr, "%s\n", e.c_str());
    return kExitOk;
}

// -------------------------------------------------------------------- pack

struct PackArgs {
    std::string checkpoint_path;
    std::string out_path;
};

int cmd_pack(const PackArgs& args) {
    const BnnModel model = BnnModel::load(args.checkpoint_path);
    const PackedModel packed = PackedModel::pack(model);
    packed.save(args.out_path);
    std::fprintf(stderr, "packed model: %zu bytes of inference tables -> %s\n",
                 packed.byte_size(), args.out_path.c_str());
    return kExitOk;
}

// ----------------------------------------------------------- model loading

// Either a checkpoint (real arithmetic) or a packed model drives
// evaluation/detection; both produce identical probabilities.
struct AnyModel {
    std::optional<BnnModel> reference;
    std::optional<PackedModel> packed;
    std::optional<PackedEvaluator> evaluator;

    TaskMode mode() const { return reference ? reference->mode : packed->mode; }
    std::uint64_t featurizer_hash() const {
        return reference ? reference->featurizer_hash : packed->featurizer_hash;
    }
    std::size_t input_width() const {
        return reference ? reference->input_width() : packed->input_width();
    }
    std::size_t output_width() const {
        return reference ? reference->output_width() : packed->output_width();
    }

    std::vector<double> probabilities(const BitVector& bits) {
        if (evaluator) {
            std::vector<double> p = evaluator->probabilities(bits);
            return p;
        }
        return reference->predict(bits);
    }
};

AnyModel load_model(const std::string& checkpoint_path, const std::string& packed_path) {
    if (checkpoint_path.empty() == packed_path.empty())
        throw ConfigError("give exactly one of --checkpoint and --packed");
    AnyModel m;
    if (!checkpoint_path.empty()) {
        m.reference = BnnModel::load(checkpoint_path);
    } else {
        m.packed = PackedModel::load(packed_path);
        m.evaluator.emplace(*m.packed);
    }
    return m;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string data_path;
    std::string format = "canonical";
    std::string labels_path;
    std::string featurizer_path;
    std::string checkpoint_path;
    std::string packed_path;
    double tau = 0.5;
    std::string split_text;
    std::string subset = "all";
    std::uint64_t seed = 0;
    std::string out_path;
    std::string json_path;
};

int cmd_eval(const EvalArgs& args) {
    const FeaturizerConfig cfg = FeaturizerConfig::load(args.featurizer_path);
    AnyModel model = load_model(args.checkpoint_path, args.packed_path);
    require_hash_match(model.featurizer_hash(), cfg, "model");

    const std::vector<CanFrame> frames =
        load_data(args.data_path, args.format, args.labels_path);
    const std::vector<FeatureVector> features = featurize_with(cfg, frames);
    const TaskMode mode = model.mode();
    std::vector<int> truths = collect_labels(features, mode);

    const std::size_t n_out = model.output_width();
    std::size_t n_classes = 2;
    if (mode == TaskMode::multiclass) {
        n_classes = n_out;
        for (int t : truths)
            if (static_cast<std::size_t>(t) >= n_classes)
                throw DataError("truth label " + std::to_string(t) +
                                " outside the model's " + std::to_string(n_classes) + " classes");
    }

    // Optional restriction to one stratified-split partition (the same
    // fractions + seed reproduce the training split).
    std::vector<std::size_t> keep;
    if (args.subset != "all") {
        SplitArgs split;
        parse_split(args.split_text, split);
        const SplitIndices idx =
            stratified_split(truths, split.train, split.val, split.test, args.seed);
        if (args.subset == "train") keep = idx.train;
        else if (args.subset == "val") keep = idx.val;
        else if (args.subset == "test") keep = idx.test;
        else throw ConfigError("--subset must be one of all, train, val, test");
    } else {
        keep.resize(features.size());
        for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    }

    std::vector<int> predictions, subset_truths;
    predictions.reserve(keep.size());
    subset_truths.reserve(keep.size());
    for (std::size_t i : keep) {
        const std::vector<double> p = model.probabilities(features[i].bits);
        int decision;
        if (mode == TaskMode::binary)
            decision = decide_binary(p.size() == 1 ? p[0] : p[1], args.tau).code;
        else
            decision = decide_multiclass(p).code;
        predictions.push_back(decision);
        subset_truths.push_back(truths[i]);
    }

    const Metrics metrics = evaluate(predictions, subset_truths, n_classes);
    std::optional<LabelManifest> manifest;
    if (!args.labels_path.empty()) manifest = LabelManifest::load(args.labels_path);
    const LabelManifest* names = manifest ? &*manifest : nullptr;

    if (args.out_path.empty()) {
        write_metrics_report(std::cout, metrics, names);
    } else {
        std::ofstream out = open_out(args.out_path);
        write_metrics_report(out, metrics, names);
    }
    if (!args.json_path.empty()) {
        std::ofstream out = open_out(args.json_path);
        write_metrics_json(out, metrics, names);
    }
    return kExitOk;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
    std::string data_path;
    std::string format = "canonical";
    std::string labels_path;
    std::string featurizer_path;
    std::string checkpoint_path;
    std::string packed_path;
    std::size_t repetitions = 20000;
    std::size_t max_inputs = 4096;
    std::string json_path;
};

int cmd_bench(const BenchArgs& args) {
    const FeaturizerConfig cfg = FeaturizerConfig::load(args.featurizer_path);
    const BnnModel reference = BnnModel::load(args.checkpoint_path);
    require_hash_match(reference.featurizer_hash, cfg, "checkpoint");
    PackedModel packed;
    if (args.packed_path.empty()) {
        packed = PackedModel::pack(reference);
    } else {
        packed = PackedModel::load(args.packed_path);
        require_hash_match(packed.featurizer_hash, cfg, "packed model");
    }

    const std::vector<CanFrame> frames =
        load_data(args.data_path, args.format, args.labels_path);
    std::vector<FeatureVector> features = featurize_with(cfg, frames);
    if (features.size() > args.max_inputs) features.resize(args.max_inputs);

    const BenchReport report = bench(packed, reference, features, args.repetitions);
    write_bench_report(std::cout, report);
    if (!args.json_path.empty()) {
        std::ofstream out = open_out(args.json_path);
        write_bench_json(out, report);
    }
    return kExitOk;
}

// ------------------------------------------------------------------ detect

struct DetectArgs {
    std::string data_path;
    std::string format = "canonical";
    std::string labels_path;
    std::string featurizer_path;
    std::string checkpoint_path;
    std::string packed_path;
    double tau = 0.5;
    std::string out_path;
};

int cmd_detect(const DetectArgs& args) {
    const FeaturizerConfig cfg = FeaturizerConfig::load(args.featurizer_path);
    AnyModel model = load_model(args.checkpoint_path, args.packed_path);
    require_hash_match(model.featurizer_hash(), cfg, "model");

    const std::vector<CanFrame> frames =
        load_data(args.data_path, args.format, args.labels_path);
    const std::vector<FeatureVector> features = featurize_with(cfg, frames);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!args.out_path.empty()) {
        file = open_out(args.out_path);
        out = &file;
    }

    const TaskMode mode = model.mode();
    const std::size_t n_out = model.output_width();
    // Header: probability columns then the decided class code.
    *out << "index,timestamp,can_id";
    if (mode == TaskMode::binary) {
        *out << ",p_attack";
    } else {
        for (std::size_t c = 0; c < n_out; ++c) *out << ",p" << c;
    }
    *out << ",decision\n";

    char buf[64];
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::vector<double> p = model.probabilities(features[i].bits);
        int decision;
        if (mode == TaskMode::binary)
            decision = decide_binary(p.size() == 1 ? p[0] : p[1], args.tau).code;
        else
            decision = decide_multiclass(p).code;

        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%03X", i, frames[i].timestamp,
                      frames[i].can_id);
        *out << buf;
        if (mode == TaskMode::binary) {
            std::snprintf(buf, sizeof(buf), ",%.6f", p.size() == 1 ? p[0] : p[1]);
            *out << buf;
        } else {
            for (const double v : p) {
                std::snprintf(buf, sizeof(buf), ",%.6f", v);
                *out << buf;
            }
        }
        *out << ',' << decision << '\n';
    }
    if (!*out) throw DataError("write failed while emitting decisions");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CAN-bus intrusion detection with a binarized neural network"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* c_gen = app.add_subcommand("generate", "Generate labeled synthetic CAN traffic");
    auto* preset_opt =
        c_gen->add_option("--preset", gen.preset,
                          "Built-in scenario: benign, flooding, fuzzing, spoofing, combined")
            ->capture_default_str();
    c_gen->add_option("--config", gen.config_path, "Scenario config file (key=value)")
        ->excludes(preset_opt);
    c_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    c_gen->add_option("--out", gen.out_path, "Output canonical CSV path")->required();
    c_gen->add_option("--manifest-out", gen.manifest_out, "Also write the label manifest here");

    FitArgs fit;
    CLI::App* c_fit =
        app.add_subcommand("fit", "Fit the ID dictionary and interval thresholds on benign frames");
    c_fit->add_option("--data", fit.data_path, "Input dataset")->required();
    c_fit->add_option("--format", fit.format, "canonical, car-hacking, or can-ids")
        ->capture_default_str();
    c_fit->add_option("--labels", fit.labels_path, "Label manifest (non-canonical formats)");
    c_fit->add_option("--bit-width", fit.bit_width, "ID code width in bits")->capture_default_str();
    auto* ql = c_fit->add_option("--q-low", fit.q_low, "Low quantile for thres1")
                   ->capture_default_str();
    auto* qh = c_fit->add_option("--q-high", fit.q_high, "High quantile for thres2")
                   ->capture_default_str();
    auto* t1 = c_fit->add_option("--thres1", fit.thres1, "Explicit thres1 seconds")
                   ->excludes(ql)->excludes(qh);
    auto* t2 = c_fit->add_option("--thres2", fit.thres2, "Explicit thres2 seconds")
                   ->excludes(ql)->excludes(qh)->needs(t1);
    t1->needs(t2);
    c_fit->add_option("--out", fit.out_path, "Output featurizer config JSON")->required();

    TrainArgs train_args;
    CLI::App* c_train = app.add_subcommand("train", "Train a binarized network");
    c_train->add_option("--data", train_args.data_path, "Labeled dataset")->required();
    c_train->add_option("--format", train_args.format, "canonical, car-hacking, or can-ids")
        ->capture_default_str();
    c_train->add_option("--labels", train_args.labels_path, "Label manifest");
    c_train->add_option("--featurizer", train_args.featurizer_path, "Featurizer config JSON")
        ->required();
    c_train->add_option("--mode", train_args.mode, "binary or multi")->capture_default_str();
    c_train->add_option("--hidden", train_args.hidden, "Hidden layer widths")
        ->delimiter(',')->capture_default_str();
    c_train->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str();
    c_train->add_option("--epochs", train_args.epochs, "Maximum epochs")->capture_default_str();
    c_train->add_option("--batch-size", train_args.batch_size, "Minibatch size")
        ->capture_default_str();
    c_train->add_option("--dropout", train_args.dropout, "Dropout rate after binarization")
        ->capture_default_str();
    c_train->add_option("--seed", train_args.seed, "Random seed")->capture_default_str();
    c_train->add_option("--split", train_args.split_text,
                        "train,val,test fractions (default 0.7,0.15,0.15)");
    c_train->add_option("--out", train_args.out_path, "Output checkpoint path")->required();
    c_train->add_option("--log", train_args.log_path, "Training log path (default <out>.log)");

    PackArgs pack_args;
    CLI::App* c_pack = app.add_subcommand("pack", "Compile a checkpoint into a bit-packed model");
    c_pack->add_option("--checkpoint", pack_args.checkpoint_path, "Input checkpoint")->required();
    c_pack->add_option("--out", pack_args.out_path, "Output packed model path")->required();

    EvalArgs eval_args;
    CLI::App* c_eval = app.add_subcommand("eval", "Evaluate a model on labeled data");
    c_eval->add_option("--data", eval_args.data_path, "Labeled dataset")->required();
    c_eval->add_option("--format", eval_args.format, "canonical, car-hacking, or can-ids")
        ->capture_default_str();
    c_eval->add_option("--labels", eval_args.labels_path, "Label manifest");
    c_eval->add_option("--featurizer", eval_args.featurizer_path, "Featurizer config JSON")
        ->required();
    c_eval->add_option("--checkpoint", eval_args.checkpoint_path, "Checkpoint model");
    c_eval->add_option("--packed", eval_args.packed_path, "Packed model");
    c_eval->add_option("--tau", eval_args.tau, "Binary decision threshold")->capture_default_str();
    c_eval->add_option("--split", eval_args.split_text,
                       "train,val,test fractions for --subset (default 0.7,0.15,0.15)");
    c_eval->add_option("--subset", eval_args.subset, "all, train, val, or test")
        ->capture_default_str();
    c_eval->add_option("--seed", eval_args.seed, "Split seed")->capture_default_str();
    c_eval->add_option("--out", eval_args.out_path, "Report path (default stdout)");
    c_eval->add_option("--json", eval_args.json_path, "Machine-readable JSON report path");

    BenchArgs bench_args;
    CLI::App* c_bench =
        app.add_subcommand("bench", "Benchmark packed inference against the reference forward");
    c_bench->add_option("--data", bench_args.data_path, "Dataset supplying input frames")
        ->required();
    c_bench->add_option("--format", bench_args.format, "canonical, car-hacking, or can-ids")
        ->capture_default_str();
    c_bench->add_option("--labels", bench_args.labels_path, "Label manifest");
    c_bench->add_option("--featurizer", bench_args.featurizer_path, "Featurizer config JSON")
        ->required();
    c_bench->add_option("--checkpoint", bench_args.checkpoint_path, "Reference checkpoint")
        ->required();
    c_bench->add_option("--packed", bench_args.packed_path,
                        "Packed model (default: pack the checkpoint in memory)");
    c_bench->add_option("--repetitions", bench_args.repetitions, "Timed calls per path")
        ->capture_default_str();
    c_bench->add_option("--json", bench_args.json_path, "Machine-readable JSON report path");

    DetectArgs detect_args;
    CLI::App* c_detect = app.add_subcommand("detect", "Batch per-frame detection on a capture");
    c_detect->add_option("--data", detect_args.data_path, "Input dataset")->required();
    c_detect->add_option("--format", detect_args.format, "canonical, car-hacking, or can-ids")
        ->capture_default_str();
    c_detect->add_option("--labels", detect_args.labels_path, "Label manifest");
    c_detect->add_option("--featurizer", detect_args.featurizer_path, "Featurizer config JSON")
        ->required();
    c_detect->add_option("--checkpoint", detect_args.checkpoint_path, "Checkpoint model");
    c_detect->add_option("--packed", detect_args.packed_path, "Packed model");
    c_detect->add_option("--tau", detect_args.tau, "Binary decision threshold")
        ->capture_default_str();
    c_detect->add_option("--out", detect_args.out_path, "Decision CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        gen.seed_given = c_gen->count("--seed") > 0;
        if (c_gen->parsed()) return cmd_generate(gen);
        if (c_fit->parsed()) {
            fit.explicit_thresholds = c_fit->count("--thres1") > 0;
            return cmd_fit(fit);
        }
        if (c_train->parsed()) return cmd_train(train_args);
        if (c_pack->parsed()) return cmd_pack(pack_args);
        if (c_eval->parsed()) return cmd_eval(eval_args);
        if (c_bench->parsed()) return cmd_bench(bench_args);
        if (c_detect->parsed()) return cmd_detect(detect_args);
        std::fprintf(stderr, "error: no subcommand selected\n");
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitInternal;
    }
    return kExitOk;
}
