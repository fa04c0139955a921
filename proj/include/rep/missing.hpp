// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rep/backbone.hpp"
#include "rep/rng.hpp"

namespace rep {

// What kind of placeholder an absent modality gets.
enum class ModalityKind { image_like, text_like, audio_like };

ModalityKind parse_modality_kind(std::string_view s);
std::string to_string(ModalityKind k);

// A missing-modality scenario: nothing missing, one modality missing at
// rate eta_s, or a modality set sharing a total budget eta_m.
struct Scenario {
    enum class Type { none, single, multi };
    Type type = Type::none;
    std::vector<int64_t> modalities;
    double rate = 0.0;

    std::string str() const;  // e.g. "multi:0+1@0.70"
    static Scenario parse(std::string_view s);
    static Scenario none() { return Scenario{}; }
    static Scenario single(int64_t modality, double eta_s);
    static Scenario multi(std::vector<int64_t> modalities, double eta_m);

    void validate(int64_t n_modalities) const;
};

// Per-sample missing flags. missing[i][m] == true means modality m of
// sample i is replaced by its placeholder.
struct MissingPattern {
    std::vector<std::vector<bool>> missing;
    Scenario scenario;
    uint64_t seed = 0;

    int64_t size() const { return static_cast<int64_t>(missing.size()); }
};

// Exact-count pattern: deterministic per rng seed. Under multi, the
// per-modality missing sets are disjoint, so every sample keeps at least one
// modality.
MissingPattern sample_missing_pattern(int64_t n, const Scenario& scenario, int64_t n_modalities,
                                      Rng rng);

// The fixed raw stand-in for an absent modality; byte-identical across calls.
Tensor placeholder_features(ModalityKind kind, int64_t seq_len, int64_t feature_width);

// Replaces the flagged modalities of `sample` by placeholders; present
// modalities are passed through untouched (same buffers).
Sample apply_placeholder(const Sample& sample, const std::vector<bool>& entry,
                         const std::vector<ModalityKind>& kinds);

// Empirical per-modality missing rates, by direct tally.
std::vector<double> verify_missing_statistics(const MissingPattern& pattern,
                                              int64_t n_modalities);

// One JSON object per line: {"sample": i, "missing": [bool per modality]}.
std::string pattern_to_jsonl(const MissingPattern& pattern);

}  // namespace rep
