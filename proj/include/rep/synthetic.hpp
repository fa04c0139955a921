// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "rep/backbone.hpp"
#include "rep/missing.hpp"
#include "rep/rng.hpp"

namespace rep {

// Controlled multimodal classification task. Per modality, tokens are noisy
// copies of a class signature split into shared dims (class-informative in
// every modality), private dims (class-informative only in that modality),
// and pure-noise dims.
struct SyntheticTaskSpec {
    int64_t modalities = 2;
    int64_t n_classes = 4;
    int64_t seq_len = 8;
    int64_t feature_width = 16;
    int64_t shared_dims = 4;
    int64_t private_dims = 4;
    double shared_scale = 1.0;
    double private_scale = 1.0;
    double noise_std = 3.5;
    int64_t train_samples = 2000;
    int64_t val_samples = 500;
    int64_t test_samples = 500;
    std::vector<ModalityKind> kinds;  // defaults to image, text(, audio)

    std::vector<ModalityKind> resolved_kinds() const;
    void validate() const;
};

struct SplitData {
    Dataset train, val, test;
};

// Deterministic per rng seed; labels balanced to within one sample per class.
SplitData generate_synthetic(const SyntheticTaskSpec& spec, Rng rng);

// The class signature (noise-free token) for one class and modality, used by
// oracle classifiers in tests.
Vec class_signature(const SyntheticTaskSpec& spec, int64_t cls, int64_t modality);

}  // namespace rep
