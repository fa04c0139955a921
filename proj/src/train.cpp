// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rep/ops.hpp"
#include "rep/threading.hpp"

namespace rep {

namespace {

Tensor onehot_label(int label, int64_t n_classes) {
    Vec v(static_cast<size_t>(n_classes), 0.0);
    if (label < 0 || label >= n_classes)
        throw ConfigError("label " + std::to_string(label) + " out of range");
    v[static_cast<size_t>(label)] = 1.0;
    return Tensor::from(1, n_classes, std::move(v));
}

Tensor onehot_batch(std::span<const Sample> batch, int64_t n_classes) {
    Vec v(batch.size() * static_cast<size_t>(n_classes), 0.0);
    for (size_t i = 0; i < batch.size(); ++i) {
        const int label = batch[i].label;
        if (label < 0 || label >= n_classes)
            throw ConfigError("label " + std::to_string(label) + " out of range");
        v[i * static_cast<size_t>(n_classes) + static_cast<size_t>(label)] = 1.0;
    }
    return Tensor::from(static_cast<int64_t>(batch.size()), n_classes, std::move(v));
}

}  // namespace

std::vector<TrainLogRow> train_loop(const BackboneConfig& bb, const RepConfig* rc,
                                    ParamStore& store, const Dataset& train,
                                    const OptimizerConfig& opt, const TrainOptions& options,
                                    const Rng& root) {
    if (options.use_rep && rc == nullptr)
        throw ConfigError("train_loop: rep forward requested without a rep config");
    if (opt.batch_size < 1 || opt.epochs < 0)
        throw ConfigError("optimizer: batch_size must be >= 1 and epochs >= 0");
    const int64_t n = static_cast<int64_t>(train.samples.size());
    if (n == 0) throw ConfigError("train_loop: empty training set");

    std::vector<std::string> trainable_names;
    for (const auto& [name, value] : store.items())
        if (options.trainable(name)) trainable_names.push_back(name);
    if (trainable_names.empty()) throw ConfigError("train_loop: nothing is trainable");

    std::vector<Vec> velocity;
    velocity.reserve(trainable_names.size());
    for (const auto& name : trainable_names)
        velocity.emplace_back(static_cast<size_t>(store.get(name).numel()), 0.0);

    std::vector<TrainLogRow> log;
    const double lambda = rc != nullptr ? rc->ortho_weight : 0.0;

    for (int64_t epoch = 0; epoch < opt.epochs; ++epoch) {
        std::vector<int64_t> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = root.substream("shuffle").substream(static_cast<uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        MissingPattern pattern;
        if (options.apply_missing) {
            pattern = sample_missing_pattern(
                n, options.scenario, bb.modalities,
                root.substream("train_pattern").substream(static_cast<uint64_t>(epoch)));
        }

        double epoch_task = 0.0, epoch_ortho = 0.0;
        int64_t batches = 0;

        for (int64_t b0 = 0; b0 < n; b0 += opt.batch_size) {
            const int64_t b1 = std::min(n, b0 + opt.batch_size);
            const int64_t bsz = b1 - b0;
            std::vector<Sample> batch;
            batch.reserve(static_cast<size_t>(bsz));
            for (int64_t bi = 0; bi < bsz; ++bi) {
                const int64_t idx = order[static_cast<size_t>(b0 + bi)];
                Sample sample = train.samples[static_cast<size_t>(idx)];
                if (options.apply_missing)
                    sample = apply_placeholder(sample, pattern.missing[static_cast<size_t>(idx)],
                                               options.kinds);
                batch.push_back(std::move(sample));
            }

            double batch_task = 0.0, batch_ortho = 0.0;
            GradMap gm;
            Bindings p;
            try {
                auto graph = Graph::make();
                p = Bindings(store, graph, options.trainable);
                Tensor loss;
                if (options.use_rep) {
                    const auto res = repm::rep_forward_batch(bb, *rc, p, batch);
                    const Tensor ce =
                        ops::cross_entropy_rows(res.logits, onehot_batch(batch, bb.n_classes));
                    batch_task = ce.value();
                    batch_ortho = res.ortho_mean.data ? res.ortho_mean.value() : 0.0;
                    loss = lambda > 0.0 && res.ortho_mean.attached()
                               ? ops::add(ce, ops::smul(lambda, res.ortho_mean))
                               : ce;
                } else {
                    const Tensor logits = backbone::forward_plain_batch(bb, p, batch);
                    loss = ops::cross_entropy_rows(logits, onehot_batch(batch, bb.n_classes));
                    batch_task = loss.value();
                }
                gm = graph->backward(loss);
            } catch (const NumericalError& e) {
                throw NumericalError("training aborted at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batches) + ": " + e.what());
            }

            // Momentum step; gradients are already batch means.
            for (size_t pi = 0; pi < trainable_names.size(); ++pi) {
                const Tensor grad = gm.grad(p.at(trainable_names[pi]));
                Vec& v = velocity[pi];
                for (size_t j = 0; j < v.size(); ++j)
                    v[j] = opt.momentum * v[j] + (*grad.data)[j];
                if (opt.lr != 0.0) {
                    const Tensor& cur = store.get(trainable_names[pi]);
                    Vec updated(*cur.data);
                    for (size_t j = 0; j < updated.size(); ++j) updated[j] -= opt.lr * v[j];
                    store.set(trainable_names[pi], Tensor::from(cur.rows, cur.cols,
                                                                std::move(updated)));
                }
            }
            epoch_task += batch_task * static_cast<double>(bsz);
            epoch_ortho += batch_ortho * static_cast<double>(bsz);
            ++batches;
        }

        TrainLogRow row;
        row.epoch = epoch;
        row.task_loss = epoch_task / static_cast<double>(n);
        row.ortho_loss = epoch_ortho / static_cast<double>(n);
        if (rc != nullptr && rc->dual_buffers && store.contains("rep/gate_e")) {
            for (int64_t m = 0; m < bb.modalities; ++m) {
                const Tensor a = ops::sigmoid(store.get("rep/gate_a_" + std::to_string(m)));
                row.alphas.push_back(a.value());
            }
            row.eps_gate = ops::sigmoid(store.get("rep/gate_e")).value();
        }
        if (rc != nullptr && rc->replay && store.contains("rep/beta_p")) {
            row.beta_p = store.get("rep/beta_p").value();
            row.beta_s = store.get("rep/beta_s").value();
        }
        log.push_back(std::move(row));
    }
    return log;
}

Predictions predict(const BackboneConfig& bb, const RepConfig* rc, const ParamStore& store,
                    const std::vector<Sample>& samples) {
    Predictions out;
    const auto n = static_cast<int64_t>(samples.size());
    out.labels.resize(static_cast<size_t>(n));
    out.predicted.resize(static_cast<size_t>(n));
    out.scores.resize(static_cast<size_t>(n));
    const Bindings p(store, nullptr, nullptr);
    constexpr int64_t kChunk = 256;
    for (int64_t c0 = 0; c0 < n; c0 += kChunk) {
        const int64_t c1 = std::min(n, c0 + kChunk);
        const std::span<const Sample> chunk(samples.data() + c0, static_cast<size_t>(c1 - c0));
        const Tensor logits = rc != nullptr
                                  ? repm::rep_forward_batch(bb, *rc, p, chunk).logits
                                  : backbone::forward_plain_batch(bb, p, chunk);
        const Tensor probs = ops::softmax(logits);
        for (int64_t i = 0; i < c1 - c0; ++i) {
            int best = 0;
            for (int64_t c = 1; c < probs.cols; ++c)
                if (probs.at(i, c) > probs.at(i, best)) best = static_cast<int>(c);
            out.labels[static_cast<size_t>(c0 + i)] = chunk[static_cast<size_t>(i)].label;
            out.predicted[static_cast<size_t>(c0 + i)] = best;
            out.scores[static_cast<size_t>(c0 + i)]
                .assign(probs.data->begin() + i * probs.cols,
                        probs.data->begin() + (i + 1) * probs.cols);
        }
    }
    return out;
}

MetricsReport evaluate_scenarios(const BackboneConfig& bb, const RepConfig* rc,
                                 const ParamStore& store, const Dataset& data,
                                 const std::vector<Scenario>& scenarios,
                                 const std::vector<ModalityKind>& kinds, const Rng& eval_root) {
    if (scenarios.empty()) throw ConfigError("evaluate_scenarios: empty scenario list");
    MetricsReport report;
    const auto n = static_cast<int64_t>(data.samples.size());
    for (const Scenario& sc : scenarios) {
        const MissingPattern pattern = sample_missing_pattern(
            n, sc, bb.modalities, eval_root.substream("eval_pattern").substream(fnv1a64(sc.str())));
        std::vector<Sample> prepared;
        prepared.reserve(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i)
            prepared.push_back(apply_placeholder(data.samples[static_cast<size_t>(i)],
                                                 pattern.missing[static_cast<size_t>(i)], kinds));
        const Predictions preds = predict(bb, rc, store, prepared);
        const ScenarioMetrics m = compute_metrics(preds, data.n_classes);
        report.breakdown.emplace(sc.str(), m);
    }
    for (const auto& [key, m] : report.breakdown) {
        report.accuracy += m.accuracy;
        report.f1_macro += m.f1_macro;
        report.auroc += m.auroc;
    }
    const auto k = static_cast<double>(report.breakdown.size());
    report.accuracy /= k;
    report.f1_macro /= k;
    report.auroc /= k;
    return report;
}

PretrainResult pretrain_backbone(const BackboneConfig& bb, const Dataset& train,
                                 const Dataset& val, const OptimizerConfig& opt,
                                 double min_accuracy, const Rng& root) {
    PretrainResult result;
    result.params = backbone::init_params(bb, root.substream("backbone_init"));
    TrainOptions options;
    options.use_rep = false;
    options.trainable = [](std::string_view) { return true; };  // backbone + head
    options.apply_missing = false;
    result.log = train_loop(bb, nullptr, result.params, train, opt, options,
                            root.substream("pretrain"));
    const Predictions preds = predict(bb, nullptr, result.params, val.samples);
    result.val_accuracy = accuracy(preds.labels, preds.predicted);
    result.converged = result.val_accuracy >= min_accuracy;
    return result;
}

double count_trainable_fraction(const ParamStore& store) {
    const int64_t rep_params = store.count_params("rep/");
    const int64_t head_params = store.count_params("head/");
    const int64_t total = store.count_params("");
    if (total == 0) return 0.0;
    return static_cast<double>(rep_params + head_params) / static_cast<double>(total);
}

double paired_sign_test_p(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw ConfigError("paired_sign_test_p: size mismatch or empty input");
    int64_t wins = 0, informative = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i]) continue;
        ++informative;
        wins += a[i] > b[i] ? 1 : 0;
    }
    if (informative == 0) return 1.0;
    // Exact binomial tail: P[X >= wins], X ~ Binomial(informative, 1/2).
    double p = 0.0;
    for (int64_t k = wins; k <= informative; ++k) {
        double log_c = 0.0;
        for (int64_t j = 0; j < k; ++j)
            log_c += std::log(static_cast<double>(informative - j)) -
                     std::log(static_cast<double>(j + 1));
        p += std::exp(log_c - static_cast<double>(informative) * std::log(2.0));
    }
    return std::min(1.0, p);
}

}  // namespace rep
