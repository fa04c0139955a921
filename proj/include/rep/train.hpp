// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rep/backbone.hpp"
#include "rep/metrics.hpp"
#include "rep/missing.hpp"
#include "rep/rep_mechanism.hpp"
#include "rep/rng.hpp"

namespace rep {

struct OptimizerConfig {
    double lr = 0.05;
    double momentum = 0.9;
    int64_t epochs = 30;
    int64_t batch_size = 32;
};

struct TrainLogRow {
    int64_t epoch = 0;
    double task_loss = 0.0;
    double ortho_loss = 0.0;
    std::vector<double> alphas;  // empty when the dual-buffer path is off
    double eps_gate = 0.0;
    double beta_p = 0.0;
    double beta_s = 0.0;
};

// How training batches are built.
struct TrainOptions {
    bool use_rep = false;  // rep_forward (needs rep params) vs plain backbone
    std::function<bool(std::string_view)> trainable;
    Scenario scenario = Scenario::none();  // train-time missing exposure
    bool apply_missing = false;            // false = complete-data training
    std::vector<ModalityKind> kinds;
};

// Mini-batch gradient descent with momentum. Per-sample gradients are
// computed on independent graphs (possibly concurrently) and reduced in
// sample order, so results are bitwise independent of the thread count.
// Throws NumericalError (with epoch/batch context) on a non-finite loss.
std::vector<TrainLogRow> train_loop(const BackboneConfig& bb, const RepConfig* rc,
                                    ParamStore& store, const Dataset& train,
                                    const OptimizerConfig& opt, const TrainOptions& options,
                                    const Rng& root);

// Argmax predictions and softmax scores over already-prepared samples.
Predictions predict(const BackboneConfig& bb, const RepConfig* rc, const ParamStore& store,
                    const std::vector<Sample>& samples);

// Applies each scenario's missing pattern to the dataset (patterns keyed by
// the scenario string, deterministic per root seed) and evaluates. Headline
// metrics are the mean over scenario entries.
MetricsReport evaluate_scenarios(const BackboneConfig& bb, const RepConfig* rc,
                                 const ParamStore& store, const Dataset& data,
                                 const std::vector<Scenario>& scenarios,
                                 const std::vector<ModalityKind>& kinds, const Rng& eval_root);

struct PretrainResult {
    ParamStore params;
    double val_accuracy = 0.0;
    bool converged = false;
    std::vector<TrainLogRow> log;
};

// Trains backbone + head on complete-modality data; convergence means
// val accuracy >= min_accuracy.
PretrainResult pretrain_backbone(const BackboneConfig& bb, const Dataset& train,
                                 const Dataset& val, const OptimizerConfig& opt,
                                 double min_accuracy, const Rng& root);

// (rep + head params) / all params.
double count_trainable_fraction(const ParamStore& store);

// One-sided paired sign test for median(a - b) > 0; ties are dropped.
// Returns the exact binomial tail probability.
double paired_sign_test_p(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rep
