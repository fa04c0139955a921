// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "rep/errors.hpp"

namespace rep {

double accuracy(const std::vector<int>& labels, const std::vector<int>& predicted) {
    if (labels.size() != predicted.size() || labels.empty())
        throw ConfigError("accuracy: label/prediction size mismatch or empty input");
    int64_t hits = 0;
    for (size_t i = 0; i < labels.size(); ++i) hits += labels[i] == predicted[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double f1_macro(const std::vector<int>& labels, const std::vector<int>& predicted,
                int64_t n_classes) {
    if (labels.size() != predicted.size() || labels.empty())
        throw ConfigError("f1_macro: label/prediction size mismatch or empty input");
    double sum = 0.0;
    for (int64_t c = 0; c < n_classes; ++c) {
        int64_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < labels.size(); ++i) {
            const bool truth = labels[i] == c;
            const bool pred = predicted[i] == c;
            tp += (truth && pred) ? 1 : 0;
            fp += (!truth && pred) ? 1 : 0;
            fn += (truth && !pred) ? 1 : 0;
        }
        const int64_t denom = 2 * tp + fp + fn;
        sum += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    return sum / static_cast<double>(n_classes);
}

double auroc_ovr_macro(const std::vector<int>& labels,
                       const std::vector<std::vector<double>>& scores) {
    if (labels.size() != scores.size() || labels.empty())
        throw ConfigError("auroc: label/score size mismatch or empty input");
    const auto n = labels.size();
    const auto n_classes = static_cast<int64_t>(scores[0].size());

    double total = 0.0;
    int64_t counted = 0;
    std::vector<size_t> order(n);
    std::vector<double> ranks(n);
    for (int64_t c = 0; c < n_classes; ++c) {
        int64_t pos = 0;
        for (size_t i = 0; i < n; ++i) pos += labels[i] == c ? 1 : 0;
        const int64_t neg = static_cast<int64_t>(n) - pos;
        if (pos == 0 || neg == 0) continue;

        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return scores[a][static_cast<size_t>(c)] < scores[b][static_cast<size_t>(c)];
        });
        // Average ranks over ties (ranks are 1-based).
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && scores[order[j + 1]][static_cast<size_t>(c)] ==
                                    scores[order[i]][static_cast<size_t>(c)])
                ++j;
            const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
            for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
            i = j + 1;
        }
        double rank_sum = 0.0;
        for (size_t k = 0; k < n; ++k)
            if (labels[k] == c) rank_sum += ranks[k];
        const double p = static_cast<double>(pos);
        total += (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
        ++counted;
    }
    if (counted == 0) throw ConfigError("auroc: no class has both positives and negatives");
    return total / static_cast<double>(counted);
}

ScenarioMetrics compute_metrics(const Predictions& p, int64_t n_classes) {
    ScenarioMetrics m;
    m.accuracy = accuracy(p.labels, p.predicted);
    m.f1_macro = f1_macro(p.labels, p.predicted, n_classes);
    m.auroc = auroc_ovr_macro(p.labels, p.scores);
    m.n_samples = static_cast<int64_t>(p.labels.size());
    return m;
}

}  // namespace rep
