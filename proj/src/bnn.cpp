#include "canbnn/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "canbnn/error.hpp"

namespace canbnn {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    if (scheduler_factor <= 0.0 || scheduler_factor >= 1.0)
        throw ConfigError("scheduler factor must lie in (0, 1)");
    if (scheduler_patience < 1) throw ConfigError("scheduler patience must be >= 1");
    if (max_epochs < 0) throw ConfigError("max epochs must be >= 0");
    if (early_stop_patience < 1) throw ConfigError("early-stop patience must be >= 1");
    if (grad_clip_max_norm <= 0.0) throw ConfigError("gradient clip norm must be positive");
    if (batch_size < 2) throw ConfigError("batch size must be >= 2 (batch-norm statistics)");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("dropout rate must lie in [0, 1)");
    if (min_improvement < 0.0) throw ConfigError("min improvement must be >= 0");
}

BnnModel BnnModel::init(const std::vector<int>& topology, TaskMode mode,
                        double dropout_rate, std::uint64_t seed) {
    if (topology.size() < 2) throw ConfigError("topology needs at least input and output widths");
    for (int w : topology)
        if (w < 1) throw ConfigError("topology widths must be >= 1");
    if (mode == TaskMode::binary && topology.back() != 1 && topology.back() != 2)
        throw ConfigError("binary mode expects an output width of 1 or 2");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("dropout rate must lie in [0, 1)");

    BnnModel m;
    m.topology = topology;
    m.mode = mode;
    m.dropout_rate = dropout_rate;
    m.seed = seed;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> wdist(-0.1, 0.1);
    auto fill = [&](Matrix& w, std::size_t n_out, std::size_t n_in) {
        w.resize(n_out, n_in);
        for (double& v : w.data) v = wdist(rng);
    };

    const std::size_t n_hidden = topology.size() - 2;
    m.layers.resize(n_hidden);
    for (std::size_t l = 0; l < n_hidden; ++l) {
        const auto n_in = static_cast<std::size_t>(topology[l]);
        const auto n_out = static_cast<std::size_t>(topology[l + 1]);
        BnnLayer& layer = m.layers[l];
        fill(layer.weights, n_out, n_in);
        layer.bias.assign(n_out, 0.0);
        layer.gamma.assign(n_out, 1.0);
        layer.beta.assign(n_out, 0.0);
        layer.run_mean.assign(n_out, 0.0);
        layer.run_var.assign(n_out, 1.0);
    }
    const auto head_in = static_cast<std::size_t>(topology[topology.size() - 2]);
    const auto head_out = static_cast<std::size_t>(topology.back());
    fill(m.head.weights, head_out, head_in);
    m.head.scale.assign(head_out, 1.0);
    m.head.shift.assign(head_out, 0.0);
    return m;
}

namespace {

// sign(W) without allocating when the destination is already shaped.
void binarize_into(const Matrix& w, Matrix& out) {
    if (out.rows != w.rows || out.cols != w.cols) out.resize(w.rows, w.cols);
    for (std::size_t i = 0; i < w.data.size(); ++i) out.data[i] = sign_pm1(w.data[i]);
}

void apply_sign(const Matrix& in, Matrix& out) {
    if (out.rows != in.rows || out.cols != in.cols) out.resize(in.rows, in.cols);
    for (std::size_t i = 0; i < in.data.size(); ++i) out.data[i] = sign_pm1(in.data[i]);
}

}  // namespace

Matrix BnnModel::forward_inference(const Matrix& x_pm1,
                                   std::vector<Matrix>* hidden_acts) const {
    if (x_pm1.cols != input_width())
        throw DataError("input width " + std::to_string(x_pm1.cols) + " does not match model input " +
                        std::to_string(input_width()));
    if (hidden_acts) hidden_acts->clear();

    Matrix act = x_pm1;
    Matrix wb, pre;
    for (const BnnLayer& layer : layers) {
        binarize_into(layer.weights, wb);
        linear_forward(act, wb, layer.bias.data(), pre);
        // Batch norm with running statistics, then sign.
        for (std::size_t r = 0; r < pre.rows; ++r) {
            double* row = pre.row(r);
            for (std::size_t j = 0; j < pre.cols; ++j) {
                const double inv_std = 1.0 / std::sqrt(layer.run_var[j] + kBnEpsilon);
                const double xhat = (row[j] - layer.run_mean[j]) * inv_std;
                row[j] = sign_pm1(layer.gamma[j] * xhat + layer.beta[j]);
            }
        }
        act = pre;
        if (hidden_acts) hidden_acts->push_back(act);
    }

    binarize_into(head.weights, wb);
    Matrix logits;
    linear_forward(act, wb, nullptr, logits);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double* row = logits.row(r);
        for (std::size_t j = 0; j < logits.cols; ++j)
            row[j] = head.scale[j] * row[j] + head.shift[j];
    }
    return logits;
}

Matrix BnnModel::predict_batch(const Matrix& x_pm1) const {
    Matrix logits = forward_inference(x_pm1);
    for (std::size_t r = 0; r < logits.rows; ++r)
        logits_to_probabilities(logits.row(r), logits.cols);
    return logits;
}

void logits_to_probabilities(double* row, std::size_t n) {
    if (n == 1) {  // sigmoid head
        row[0] = 1.0 / (1.0 + std::exp(-row[0]));
        return;
    }
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
}

std::vector<double> BnnModel::predict(const BitVector& x) const {
    if (x.size() != input_width())
        throw DataError("feature width " + std::to_string(x.size()) + " does not match model input " +
                        std::to_string(input_width()));
    Matrix row(1, x.size());
    to_pm1_row(x, row.row(0));
    Matrix p = predict_batch(row);
    return {p.data.begin(), p.data.end()};
}

void to_pm1_row(const BitVector& bits, double* row) {
    for (std::size_t i = 0; i < bits.size(); ++i) row[i] = bits.get(i) ? 1.0 : -1.0;
}

Matrix to_pm1_matrix(std::span<const FeatureVector> features) {
    if (features.empty()) throw DataError("no feature vectors to convert");
    Matrix m(features.size(), features.front().bits.size());
    for (std::size_t r = 0; r < features.size(); ++r) {
        if (features[r].bits.size() != m.cols)
            throw DataError("inconsistent feature widths in batch");
        to_pm1_row(features[r].bits, m.row(r));
    }
    return m;
}

Dataset make_dataset(std::span<const FeatureVector> features, TaskMode mode) {
    Dataset d;
    d.x = to_pm1_matrix(features);
    d.y.reserve(features.size());
    for (const FeatureVector& f : features) {
        if (!f.label) throw DataError("unlabeled feature vector in training data");
        int y = *f.label;
        if (mode == TaskMode::binary && y > 1) y = 1;  // collapse attack classes
        d.y.push_back(y);
    }
    return d;
}

void forward_train(BnnModel& model, const Matrix& x_pm1, std::mt19937_64& rng,
                   ForwardCache& cache, double bn_momentum) {
    const std::size_t batch = x_pm1.rows;
    if (batch < 2) throw DataError("training batches need at least 2 rows for batch norm");
    if (x_pm1.cols != model.input_width())
        throw DataError("input width does not match model input");

    const double keep_prob = 1.0 - model.dropout_rate;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    cache.layers.resize(model.layers.size());
    cache.binary_weights.resize(model.layers.size());

    const Matrix* act = &x_pm1;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        BnnLayer& layer = model.layers[l];
        LayerCache& lc = cache.layers[l];
        lc.input = *act;
        binarize_into(layer.weights, cache.binary_weights[l]);
        linear_forward(lc.input, cache.binary_weights[l], layer.bias.data(), lc.pre);

        const std::size_t n = lc.pre.cols;
        lc.mean.assign(n, 0.0);
        lc.var.assign(n, 0.0);
        lc.inv_std.assign(n, 0.0);
        for (std::size_t r = 0; r < batch; ++r) {
            const double* row = lc.pre.row(r);
            for (std::size_t j = 0; j < n; ++j) lc.mean[j] += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) lc.mean[j] /= static_cast<double>(batch);
        for (std::size_t r = 0; r < batch; ++r) {
            const double* row = lc.pre.row(r);
            for (std::size_t j = 0; j < n; ++j) {
                const double d = row[j] - lc.mean[j];
                lc.var[j] += d * d;
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            lc.var[j] /= static_cast<double>(batch);  // biased, used for normalization
            lc.inv_std[j] = 1.0 / std::sqrt(lc.var[j] + kBnEpsilon);
        }

        lc.xhat.resize(batch, n);
        lc.bn_out.resize(batch, n);
        for (std::size_t r = 0; r < batch; ++r) {
            const double* p = lc.pre.row(r);
            double* xh = lc.xhat.row(r);
            double* bo = lc.bn_out.row(r);
            for (std::size_t j = 0; j < n; ++j) {
                xh[j] = (p[j] - lc.mean[j]) * lc.inv_std[j];
                bo[j] = layer.gamma[j] * xh[j] + layer.beta[j];
            }
        }

        // Running statistics (unbiased variance) with momentum.
        const double mom = bn_momentum;
        const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
        for (std::size_t j = 0; j < n; ++j) {
            layer.run_mean[j] = (1.0 - mom) * layer.run_mean[j] + mom * lc.mean[j];
            layer.run_var[j] = (1.0 - mom) * layer.run_var[j] + mom * lc.var[j] * unbias;
        }

        apply_sign(lc.bn_out, lc.sign_out);

        lc.output.resize(batch, n);
        lc.keep_mask.assign(batch * n, 1);
        if (model.dropout_rate > 0.0) {
            for (std::size_t i = 0; i < lc.output.data.size(); ++i) {
                const bool keep = unit(rng) < keep_prob;
                lc.keep_mask[i] = keep ? 1 : 0;
                lc.output.data[i] = keep ? lc.sign_out.data[i] / keep_prob : 0.0;
            }
        } else {
            lc.output.data = lc.sign_out.data;
        }
        act = &lc.output;
    }

    cache.head_input = *act;
    binarize_into(model.head.weights, cache.head_weights);
    linear_forward(cache.head_input, cache.head_weights, nullptr, cache.head_z);
    cache.logits.resize(batch, cache.head_z.cols);
    for (std::size_t r = 0; r < batch; ++r) {
        const double* z = cache.head_z.row(r);
        double* out = cache.logits.row(r);
        for (std::size_t j = 0; j < cache.head_z.cols; ++j)
            out[j] = model.head.scale[j] * z[j] + model.head.shift[j];
    }
}

std::vector<std::span<double>> param_spans(BnnModel& model) {
    std::vector<std::span<double>> spans;
    for (BnnLayer& layer : model.layers) {
        spans.emplace_back(layer.weights.data);
        spans.emplace_back(layer.bias);
        spans.emplace_back(layer.gamma);
        spans.emplace_back(layer.beta);
    }
    spans.emplace_back(model.head.weights.data);
    spans.emplace_back(model.head.scale);
    spans.emplace_back(model.head.shift);
    return spans;
}

std::vector<std::size_t> weight_span_indices(const BnnModel& model) {
    std::vector<std::size_t> idx;
    for (std::size_t l = 0; l < model.layers.size(); ++l) idx.push_back(l * 4);
    idx.push_back(model.layers.size() * 4);
    return idx;
}

double Gradients::global_norm() const {
    double sq = 0.0;
    for (const auto& t : tensors)
        for (double v : t) sq += v * v;
    return std::sqrt(sq);
}

void Gradients::scale(double s) {
    for (auto& t : tensors)
        for (double& v : t) v *= s;
}

Gradients backward_ste(const BnnModel& model, const ForwardCache& cache,
                       const Matrix& grad_logits) {
    if (grad_logits.rows != cache.logits.rows || grad_logits.cols != cache.logits.cols)
        throw InternalError("logit gradient shape mismatch");
    const std::size_t batch = grad_logits.rows;

    Gradients g;
    g.tensors.resize(model.layers.size() * 4 + 3);

    // Head: logits = scale * z + shift, z = sign(W_head) * input.
    const std::size_t head_out = model.head.weights.rows;
    const std::size_t head_in = model.head.weights.cols;
    auto& g_head_w = g.tensors[model.layers.size() * 4];
    auto& g_scale = g.tensors[model.layers.size() * 4 + 1];
    auto& g_shift = g.tensors[model.layers.size() * 4 + 2];
    g_head_w.assign(head_out * head_in, 0.0);
    g_scale.assign(head_out, 0.0);
    g_shift.assign(head_out, 0.0);

    Matrix d_z(batch, head_out);
    for (std::size_t r = 0; r < batch; ++r) {
        const double* gl = grad_logits.row(r);
        const double* z = cache.head_z.row(r);
        double* dz = d_z.row(r);
        for (std::size_t j = 0; j < head_out; ++j) {
            g_scale[j] += gl[j] * z[j];
            g_shift[j] += gl[j];
            dz[j] = gl[j] * model.head.scale[j];
        }
    }

    Matrix d_wb(head_out, head_in);
    linear_backward_weights(d_z, cache.head_input, d_wb);
    for (std::size_t i = 0; i < d_wb.data.size(); ++i)
        g_head_w[i] = d_wb.data[i] * ste_passthrough(model.head.weights.data[i]);

    Matrix d_act(batch, head_in);
    linear_backward_input(d_z, cache.head_weights, d_act);

    const double keep_prob = 1.0 - model.dropout_rate;
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const BnnLayer& layer = model.layers[li];
        const LayerCache& lc = cache.layers[li];
        const std::size_t n = layer.weights.rows;
        const std::size_t n_in = layer.weights.cols;

        // Dropout backward, then the straight-through sign gradient.
        Matrix d_bn(batch, n);
        for (std::size_t i = 0; i < d_bn.data.size(); ++i) {
            double v = d_act.data[i];
            if (model.dropout_rate > 0.0) v = lc.keep_mask[i] ? v / keep_prob : 0.0;
            d_bn.data[i] = v * ste_passthrough(lc.bn_out.data[i]);
        }

        auto& g_w = g.tensors[li * 4];
        auto& g_b = g.tensors[li * 4 + 1];
        auto& g_gamma = g.tensors[li * 4 + 2];
        auto& g_beta = g.tensors[li * 4 + 3];
        g_w.assign(n * n_in, 0.0);
        g_b.assign(n, 0.0);
        g_gamma.assign(n, 0.0);
        g_beta.assign(n, 0.0);

        // Batch-norm backward (exact, batch statistics).
        std::vector<double> sum_dxhat(n, 0.0), sum_dxhat_xhat(n, 0.0);
        Matrix d_xhat(batch, n);
        for (std::size_t r = 0; r < batch; ++r) {
            const double* db = d_bn.row(r);
            const double* xh = lc.xhat.row(r);
            double* dxh = d_xhat.row(r);
            for (std::size_t j = 0; j < n; ++j) {
                g_gamma[j] += db[j] * xh[j];
                g_beta[j] += db[j];
                dxh[j] = db[j] * layer.gamma[j];
                sum_dxhat[j] += dxh[j];
                sum_dxhat_xhat[j] += dxh[j] * xh[j];
            }
        }
        Matrix d_pre(batch, n);
        const double inv_batch = 1.0 / static_cast<double>(batch);
        for (std::size_t r = 0; r < batch; ++r) {
            const double* dxh = d_xhat.row(r);
            const double* xh = lc.xhat.row(r);
            double* dp = d_pre.row(r);
            for (std::size_t j = 0; j < n; ++j) {
                dp[j] = lc.inv_std[j] * inv_batch *
                        (static_cast<double>(batch) * dxh[j] - sum_dxhat[j] -
                         xh[j] * sum_dxhat_xhat[j]);
            }
        }

        for (std::size_t r = 0; r < batch; ++r) {
            const double* dp = d_pre.row(r);
            for (std::size_t j = 0; j < n; ++j) g_b[j] += dp[j];
        }

        Matrix d_wb_l(n, n_in);
        linear_backward_weights(d_pre, lc.input, d_wb_l);
        for (std::size_t i = 0; i < d_wb_l.data.size(); ++i)
            g_w[i] = d_wb_l.data[i] * ste_passthrough(layer.weights.data[i]);

        if (li > 0) {
            d_act.resize(batch, n_in);
            linear_backward_input(d_pre, cache.binary_weights[li], d_act);
        }
    }
    return g;
}

double loss_and_grad(TaskMode mode, const Matrix& logits, std::span<const int> y,
                     Matrix& grad_logits) {
    if (logits.rows != y.size()) throw InternalError("label count does not match logit rows");
    grad_logits.resize(logits.rows, logits.cols);
    const double inv_batch = 1.0 / static_cast<double>(logits.rows);
    double loss = 0.0;

    if (mode == TaskMode::binary && logits.cols == 1) {
        // BCE with logits; numerically stable log(1 + exp(.)).
        for (std::size_t r = 0; r < logits.rows; ++r) {
            if (y[r] != 0 && y[r] != 1)
                throw DataError("label " + std::to_string(y[r]) +
                                " outside model output range");
            const double z = logits.at(r, 0);
            const double t = static_cast<double>(y[r]);
            loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
            const double p = 1.0 / (1.0 + std::exp(-z));
            grad_logits.at(r, 0) = (p - t) * inv_batch;
        }
        return loss * inv_batch;
    }

    // Softmax cross-entropy (also binary models with a 2-wide head).
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const double* row = logits.row(r);
        double* grow = grad_logits.row(r);
        const int yy = y[r];
        if (yy < 0 || static_cast<std::size_t>(yy) >= logits.cols)
            throw DataError("label " + std::to_string(yy) + " outside model output range");
        double mx = row[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp(row[j] - mx);
        const double log_sum = std::log(sum) + mx;
        loss += log_sum - row[yy];
        for (std::size_t j = 0; j < logits.cols; ++j) {
            const double p = std::exp(row[j] - log_sum);
            grow[j] = (p - (static_cast<std::size_t>(yy) == j ? 1.0 : 0.0)) * inv_batch;
        }
    }
    return loss * inv_batch;
}

ClassLabel decide_binary(double prob_attack, double tau) {
    if (prob_attack >= tau) return {1, "attack"};
    return {0, "benign"};
}

ClassLabel decide_multiclass(std::span<const double> probs, const LabelManifest* names) {
    if (probs.empty()) throw InternalError("empty probability vector");
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.size(); ++j)
        if (probs[j] > probs[best]) best = j;
    const auto code = static_cast<std::uint16_t>(best);
    std::string name = names && names->has_code(code) ? names->name_of(code)
                                                      : "class" + std::to_string(best);
    return {code, name};
}

}  // namespace canbnn
