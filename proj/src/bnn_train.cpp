#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "canbnn/bnn.hpp"
#include "canbnn/error.hpp"
#include "canbnn/rng.hpp"

namespace canbnn {

namespace {

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t t = 0;
};

double eval_loss(const BnnModel& model, const Dataset& set) {
    // Inference-mode loss in chunks; gradients are computed and discarded.
    const std::size_t chunk = 4096;
    double total = 0.0;
    Matrix grad;
    for (std::size_t start = 0; start < set.x.rows; start += chunk) {
        const std::size_t rows = std::min(chunk, set.x.rows - start);
        Matrix part(rows, set.x.cols);
        std::copy_n(set.x.row(start), rows * set.x.cols, part.data.begin());
        Matrix logits = model.forward_inference(part);
        std::span<const int> y(set.y.data() + start, rows);
        total += loss_and_grad(model.mode, logits, y, grad) * static_cast<double>(rows);
    }
    return total / static_cast<double>(set.x.rows);
}

void check_labels(const BnnModel& model, const Dataset& set, const char* which) {
    const int n_out = static_cast<int>(model.output_width());
    const int max_class = (model.mode == TaskMode::binary && n_out == 1) ? 1 : n_out - 1;
    for (int y : set.y)
        if (y < 0 || y > max_class)
            throw DataError(std::string(which) + " label " + std::to_string(y) +
                            " outside model output range 0.." + std::to_string(max_class));
}

}  // namespace

TrainResult train(const BnnModel& initial, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& config,
                  const TrainHooks& hooks) {
    config.validate();
    if (train_set.x.rows != train_set.y.size() || val_set.x.rows != val_set.y.size())
        throw DataError("feature/label count mismatch");
    if (train_set.x.rows < 2) throw DataError("training set needs at least 2 samples");
    if (val_set.x.rows == 0) throw DataError("validation set is empty");
    check_labels(initial, train_set, "train");
    check_labels(initial, val_set, "validation");

    BnnModel model = initial;
    std::mt19937_64 rng(mix_seed(config.seed, 1));  // shuffles + dropout

    std::vector<std::span<double>> params = param_spans(model);
    const std::vector<std::size_t> weight_idx = weight_span_indices(model);
    AdamState adam;
    adam.m.resize(params.size());
    adam.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam.m[i].assign(params[i].size(), 0.0);
        adam.v[i].assign(params[i].size(), 0.0);
    }

    TrainResult result;
    double lr = config.learning_rate;
    double best_val = std::numeric_limits<double>::infinity();
    int stagnant = 0;        // epochs since last improvement (early stop)
    int sched_stagnant = 0;  // epochs since last improvement (scheduler)

    std::vector<std::size_t> order(train_set.x.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});

    ForwardCache cache;
    Matrix batch_x, grad_logits;
    std::vector<int> batch_y;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t rows_seen = 0;
        int batch_idx = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t rows = std::min<std::size_t>(config.batch_size, order.size() - start);
            if (rows < 2) break;  // too small for batch norm
            batch_x.resize(rows, train_set.x.cols);
            batch_y.resize(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t src = order[start + r];
                std::copy_n(train_set.x.row(src), train_set.x.cols, batch_x.row(r));
                batch_y[r] = train_set.y[src];
            }

            forward_train(model, batch_x, rng, cache, config.bn_momentum);
            const double batch_loss =
                loss_and_grad(model.mode, cache.logits, batch_y, grad_logits);
            if (!std::isfinite(batch_loss))
                throw InternalError("non-finite loss at epoch " + std::to_string(epoch) +
                                    " batch " + std::to_string(batch_idx) +
                                    " (lr=" + std::to_string(lr) + ")");

            Gradients g = backward_ste(model, cache, grad_logits);
            const double norm_before = g.global_norm();
            if (!std::isfinite(norm_before))
                throw InternalError("non-finite gradient at epoch " + std::to_string(epoch) +
                                    " batch " + std::to_string(batch_idx) +
                                    " (lr=" + std::to_string(lr) + ")");
            double norm_after = norm_before;
            if (norm_before > config.grad_clip_max_norm) {
                g.scale(config.grad_clip_max_norm / norm_before);
                norm_after = g.global_norm();
            }

            adam.t += 1;
            const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.t));
            for (std::size_t i = 0; i < params.size(); ++i) {
                auto& m = adam.m[i];
                auto& v = adam.v[i];
                const auto& gt = g.tensors[i];
                auto p = params[i];
                for (std::size_t k = 0; k < p.size(); ++k) {
                    m[k] = config.adam_beta1 * m[k] + (1.0 - config.adam_beta1) * gt[k];
                    v[k] = config.adam_beta2 * v[k] + (1.0 - config.adam_beta2) * gt[k] * gt[k];
                    const double mhat = m[k] / bc1;
                    const double vhat = v[k] / bc2;
                    p[k] -= lr * mhat / (std::sqrt(vhat) + config.adam_epsilon);
                }
            }
            // Latent weights stay inside the STE pass-through region.
            for (std::size_t wi : weight_idx)
                for (double& w : params[wi]) w = std::clamp(w, -1.0, 1.0);

            if (hooks.on_batch)
                hooks.on_batch(epoch, batch_idx, batch_loss, norm_before, norm_after, lr);
            loss_sum += batch_loss * static_cast<double>(rows);
            rows_seen += rows;
            ++batch_idx;
        }
        if (rows_seen == 0) throw DataError("no usable training batches");

        double val_loss = eval_loss(model, val_set);
        if (hooks.adjust_val_loss) val_loss = hooks.adjust_val_loss(epoch, val_loss);

        const auto t1 = std::chrono::steady_clock::now();
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(rows_seen);
        entry.val_loss = val_loss;
        entry.learning_rate = lr;
        entry.elapsed_s = std::chrono::duration<double>(t1 - t0).count();
        result.log.push_back(entry);

        if (val_loss < best_val - config.min_improvement) {
            best_val = val_loss;
            result.model = model;
            result.best_epoch = epoch;
            stagnant = 0;
            sched_stagnant = 0;
        } else {
            ++stagnant;
            ++sched_stagnant;
        }

        if (stagnant >= config.early_stop_patience) {
            result.events.push_back("epoch " + std::to_string(epoch) +
                                    ": early stop (no improvement for " +
                                    std::to_string(stagnant) + " epochs)");
            break;
        }
        if (sched_stagnant >= config.scheduler_patience) {
            const double new_lr = lr * config.scheduler_factor;
            char buf[128];
            std::snprintf(buf, sizeof(buf), "epoch %d: lr %.6g -> %.6g (plateau)", epoch, lr,
                          new_lr);
            result.events.emplace_back(buf);
            lr = new_lr;
            sched_stagnant = 0;
        }
    }

    if (result.best_epoch == 0) {  // defensive; epoch 1 always improves on +inf
        result.model = model;
        result.best_epoch = static_cast<int>(result.log.size());
        best_val = result.log.empty() ? 0.0 : result.log.back().val_loss;
    }
    result.best_val_loss = best_val;
    return result;
}

void write_training_log(std::ostream& out, std::span<const EpochLog> log) {
    out << "# epoch train_loss val_loss lr elapsed_s\n";
    char buf[160];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6g %.3f\n", e.epoch, e.train_loss,
                      e.val_loss, e.learning_rate, e.elapsed_s);
        out << buf;
    }
}

}  // namespace canbnn
