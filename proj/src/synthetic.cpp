// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace rep {

namespace {

// Distinct +-1 class codes, chosen deterministically (independent of the data
// seed) by maximizing the minimum pairwise Hamming distance over candidates.
std::vector<Vec> class_codes(int64_t classes, int64_t dims, uint64_t salt) {
    Rng rng(splitmix64(0x5eedc0de5ull ^ salt));
    std::vector<Vec> best;
    int64_t best_min = -1;
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<Vec> codes(static_cast<size_t>(classes),
                               Vec(static_cast<size_t>(dims), 1.0));
        for (auto& row : codes)
            for (auto& v : row) v = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        int64_t min_dist = dims + 1;
        for (size_t a = 0; a < codes.size(); ++a)
            for (size_t b = a + 1; b < codes.size(); ++b) {
                int64_t dist = 0;
                for (int64_t j = 0; j < dims; ++j)
                    if (codes[a][static_cast<size_t>(j)] != codes[b][static_cast<size_t>(j)])
                        ++dist;
                min_dist = std::min(min_dist, dist);
            }
        if (min_dist > best_min) {
            best_min = min_dist;
            best = codes;
        }
    }
    if (best_min < 1)
        throw ConfigError("synthetic task: cannot draw " + std::to_string(classes) +
                          " distinct class codes in " + std::to_string(dims) + " dims");
    return best;
}

}  // namespace

std::vector<ModalityKind> SyntheticTaskSpec::resolved_kinds() const {
    if (!kinds.empty()) return kinds;
    std::vector<ModalityKind> out{ModalityKind::image_like, ModalityKind::text_like,
                                  ModalityKind::audio_like};
    out.resize(static_cast<size_t>(modalities));
    return out;
}

void SyntheticTaskSpec::validate() const {
    if (modalities < 2 || modalities > 3)
        throw ConfigError("task.modalities: expected 2 or 3, got " + std::to_string(modalities));
    if (n_classes < 2) throw ConfigError("task.n_classes must be >= 2");
    if (seq_len < 1 || feature_width < 1)
        throw ConfigError("task: seq_len and feature_width must be positive");
    if (shared_dims < 1 || private_dims < 1)
        throw ConfigError("task: shared_dims and private_dims must be positive");
    if (shared_dims + private_dims > feature_width)
        throw ConfigError("task: shared_dims + private_dims (" +
                          std::to_string(shared_dims + private_dims) + ") exceed feature_width (" +
                          std::to_string(feature_width) + ")");
    if (noise_std < 0.0) throw ConfigError("task.noise_std must be non-negative");
    if (train_samples < 1 || val_samples < 1 || test_samples < 1)
        throw ConfigError("task: all splits need at least one sample");
    if (!kinds.empty() && static_cast<int64_t>(kinds.size()) != modalities)
        throw ConfigError("task.kinds: expected " + std::to_string(modalities) +
                          " entries, got " + std::to_string(kinds.size()));
    const double cap_s = std::pow(2.0, static_cast<double>(shared_dims));
    const double cap_p = std::pow(2.0, static_cast<double>(private_dims));
    if (static_cast<double>(n_classes) > cap_s || static_cast<double>(n_classes) > cap_p)
        throw ConfigError("task: " + std::to_string(n_classes) +
                          " classes cannot get distinct codes in the signal dims");
}

Vec class_signature(const SyntheticTaskSpec& spec, int64_t cls, int64_t modality) {
    if (cls < 0 || cls >= spec.n_classes)
        throw ConfigError("class_signature: class " + std::to_string(cls) + " out of range");
    const auto shared = class_codes(spec.n_classes, spec.shared_dims, fnv1a64("shared"));
    const auto priv = class_codes(spec.n_classes, spec.private_dims,
                                  fnv1a64("private") ^ static_cast<uint64_t>(modality));
    Vec sig(static_cast<size_t>(spec.feature_width), 0.0);
    for (int64_t j = 0; j < spec.shared_dims; ++j)
        sig[static_cast<size_t>(j)] =
            spec.shared_scale * shared[static_cast<size_t>(cls)][static_cast<size_t>(j)];
    for (int64_t j = 0; j < spec.private_dims; ++j)
        sig[static_cast<size_t>(spec.shared_dims + j)] =
            spec.private_scale * priv[static_cast<size_t>(cls)][static_cast<size_t>(j)];
    return sig;
}

namespace {

Dataset generate_split(const SyntheticTaskSpec& spec, int64_t n, Rng rng,
                       const std::vector<std::vector<Vec>>& signatures) {
    Dataset out;
    out.n_classes = spec.n_classes;
    std::vector<int> labels(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        labels[static_cast<size_t>(i)] = static_cast<int>(i % spec.n_classes);
    Rng label_rng = rng.substream("labels");
    label_rng.shuffle(labels);
    Rng feat_rng = rng.substream("features");
    out.samples.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        Sample s;
        s.label = labels[static_cast<size_t>(i)];
        for (int64_t m = 0; m < spec.modalities; ++m) {
            const Vec& sig = signatures[static_cast<size_t>(m)][static_cast<size_t>(s.label)];
            Vec v(static_cast<size_t>(spec.seq_len * spec.feature_width));
            for (int64_t t = 0; t < spec.seq_len; ++t)
                for (int64_t j = 0; j < spec.feature_width; ++j)
                    v[t * spec.feature_width + j] =
                        sig[static_cast<size_t>(j)] + spec.noise_std * feat_rng.normal();
            s.features.push_back(Tensor::from(spec.seq_len, spec.feature_width, std::move(v)));
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace

SplitData generate_synthetic(const SyntheticTaskSpec& spec, Rng rng) {
    spec.validate();
    std::vector<std::vector<Vec>> signatures(static_cast<size_t>(spec.modalities));
    for (int64_t m = 0; m < spec.modalities; ++m)
        for (int64_t c = 0; c < spec.n_classes; ++c)
            signatures[static_cast<size_t>(m)].push_back(class_signature(spec, c, m));
    SplitData out;
    out.train = generate_split(spec, spec.train_samples, rng.substream("train"), signatures);
    out.val = generate_split(spec, spec.val_samples, rng.substream("val"), signatures);
    out.test = generate_split(spec, spec.test_samples, rng.substream("test"), signatures);
    return out;
}

}  // namespace rep
