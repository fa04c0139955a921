// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rep {

// Predictions over one evaluation set.
struct Predictions {
    std::vector<int> labels;
    std::vector<int> predicted;
    std::vector<std::vector<double>> scores;  // [sample][class] probabilities
};

double accuracy(const std::vector<int>& labels, const std::vector<int>& predicted);

// Unweighted mean of per-class F1; a class with no true and no predicted
// samples contributes 0.
double f1_macro(const std::vector<int>& labels, const std::vector<int>& predicted,
                int64_t n_classes);

// Macro one-vs-rest AUROC with average-rank tie handling. Classes missing
// positives or negatives are skipped.
double auroc_ovr_macro(const std::vector<int>& labels,
                       const std::vector<std::vector<double>>& scores);

struct ScenarioMetrics {
    double accuracy = 0.0;
    double f1_macro = 0.0;
    double auroc = 0.0;
    int64_t n_samples = 0;
};

ScenarioMetrics compute_metrics(const Predictions& p, int64_t n_classes);

// The evaluation record of one run: headline metrics (mean over scenarios),
// the per-scenario breakdown, bookkeeping.
struct MetricsReport {
    double accuracy = 0.0;
    double f1_macro = 0.0;
    double auroc = 0.0;
    double param_fraction = 0.0;
    uint64_t seed = 0;
    std::string config_hash;
    std::map<std::string, ScenarioMetrics> breakdown;  // keyed by scenario string
};

}  // namespace rep
