// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/missing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rep {

ModalityKind parse_modality_kind(std::string_view s) {
    if (s == "image") return ModalityKind::image_like;
    if (s == "text") return ModalityKind::text_like;
    if (s == "audio") return ModalityKind::audio_like;
    throw ConfigError("unknown modality kind '" + std::string(s) +
                      "' (expected image, text, or audio)");
}

std::string to_string(ModalityKind k) {
    switch (k) {
        case ModalityKind::image_like: return "image";
        case ModalityKind::text_like: return "text";
        case ModalityKind::audio_like: return "audio";
    }
    return "image";
}

Scenario Scenario::single(int64_t modality, double eta_s) {
    Scenario s;
    s.type = Type::single;
    s.modalities = {modality};
    s.rate = eta_s;
    return s;
}

Scenario Scenario::multi(std::vector<int64_t> modalities, double eta_m) {
    Scenario s;
    s.type = Type::multi;
    s.modalities = std::move(modalities);
    s.rate = eta_m;
    return s;
}

std::string Scenario::str() const {
    if (type == Type::none) return "none";
    std::ostringstream out;
    out << (type == Type::single ? "single:" : "multi:");
    for (size_t i = 0; i < modalities.size(); ++i) {
        if (i) out << "+";
        out << modalities[i];
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "@%.2f", rate);
    out << buf;
    return out.str();
}

Scenario Scenario::parse(std::string_view s) {
    if (s == "none") return none();
    const auto colon = s.find(':');
    const auto at = s.rfind('@');
    if (colon == std::string_view::npos || at == std::string_view::npos || at < colon)
        throw ConfigError("scenario '" + std::string(s) +
                          "': expected none, single:<m>@<rate>, or multi:<m>+<m>@<rate>");
    const std::string_view kind = s.substr(0, colon);
    const std::string mods(s.substr(colon + 1, at - colon - 1));
    const std::string rate_str(s.substr(at + 1));
    Scenario out;
    if (kind == "single") out.type = Type::single;
    else if (kind == "multi") out.type = Type::multi;
    else throw ConfigError("scenario '" + std::string(s) + "': unknown kind '" + std::string(kind) + "'");
    std::stringstream ms(mods);
    std::string tok;
    while (std::getline(ms, tok, '+')) {
        if (tok.empty()) continue;
        out.modalities.push_back(std::stoll(tok));
    }
    try {
        out.rate = std::stod(rate_str);
    } catch (...) {
        throw ConfigError("scenario '" + std::string(s) + "': bad rate '" + rate_str + "'");
    }
    return out;
}

void Scenario::validate(int64_t n_modalities) const {
    if (type == Type::none) return;
    if (rate < 0.0 || rate > 1.0)
        throw ConfigError("scenario rate " + std::to_string(rate) + " outside [0,1]");
    if (modalities.empty())
        throw ConfigError("scenario: modality set must not be empty");
    if (type == Type::single && modalities.size() != 1)
        throw ConfigError("single scenario takes exactly one modality");
    for (const int64_t m : modalities) {
        if (m < 0 || m >= n_modalities)
            throw ConfigError("scenario modality " + std::to_string(m) + " out of range (K=" +
                              std::to_string(n_modalities) + ")");
    }
    if (type == Type::multi) {
        std::vector<int64_t> sorted = modalities;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ConfigError("multi scenario lists a modality twice");
    }
}

namespace {

int64_t round_half_up(double x) { return static_cast<int64_t>(std::floor(x + 0.5)); }

}  // namespace

MissingPattern sample_missing_pattern(int64_t n, const Scenario& scenario, int64_t n_modalities,
                                      Rng rng) {
    if (n < 0) throw ConfigError("sample_missing_pattern: negative dataset size");
    scenario.validate(n_modalities);

    MissingPattern out;
    out.scenario = scenario;
    out.seed = rng.seed();
    out.missing.assign(static_cast<size_t>(n),
                       std::vector<bool>(static_cast<size_t>(n_modalities), false));
    if (scenario.type == Scenario::Type::none || n == 0) return out;

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    // Total budget, rounded half-up, split evenly across the missing set so
    // the per-modality sets are disjoint and the total matches exactly.
    const int64_t budget = round_half_up(scenario.rate * static_cast<double>(n));
    const auto n_miss = static_cast<int64_t>(scenario.modalities.size());
    int64_t cursor = 0;
    for (int64_t mi = 0; mi < n_miss; ++mi) {
        const int64_t count = budget / n_miss + (mi < budget % n_miss ? 1 : 0);
        const auto m = static_cast<size_t>(scenario.modalities[static_cast<size_t>(mi)]);
        for (int64_t i = 0; i < count; ++i)
            out.missing[static_cast<size_t>(order[static_cast<size_t>(cursor++)])][m] = true;
    }
    return out;
}

Tensor placeholder_features(ModalityKind kind, int64_t seq_len, int64_t feature_width) {
    switch (kind) {
        case ModalityKind::image_like:
            return Tensor::full(seq_len, feature_width, 1.0);
        case ModalityKind::audio_like:
            return Tensor::zeros(seq_len, feature_width);
        case ModalityKind::text_like: {
            // Minimal-token sequence: a lone marker in the first position.
            Vec v(static_cast<size_t>(seq_len * feature_width), 0.0);
            v[0] = 1.0;
            return Tensor::from(seq_len, feature_width, std::move(v));
        }
    }
    throw ConfigError("placeholder_features: unknown modality kind");
}

Sample apply_placeholder(const Sample& sample, const std::vector<bool>& entry,
                         const std::vector<ModalityKind>& kinds) {
    if (entry.size() != sample.features.size() || kinds.size() != sample.features.size())
        throw ConfigError("apply_placeholder: modality count mismatch (" +
                          std::to_string(sample.features.size()) + " features, " +
                          std::to_string(entry.size()) + " flags, " +
                          std::to_string(kinds.size()) + " kinds)");
    Sample out = sample;
    for (size_t m = 0; m < entry.size(); ++m) {
        if (!entry[m]) continue;
        const Tensor& f = sample.features[m];
        out.features[m] = placeholder_features(kinds[m], f.rows, f.cols);
    }
    return out;
}

std::vector<double> verify_missing_statistics(const MissingPattern& pattern,
                                              int64_t n_modalities) {
    std::vector<double> rates(static_cast<size_t>(n_modalities), 0.0);
    if (pattern.missing.empty()) return rates;
    for (const auto& entry : pattern.missing)
        for (size_t m = 0; m < entry.size() && m < rates.size(); ++m)
            if (entry[m]) rates[m] += 1.0;
    for (double& r : rates) r /= static_cast<double>(pattern.missing.size());
    return rates;
}

std::string pattern_to_jsonl(const MissingPattern& pattern) {
    std::ostringstream out;
    for (size_t i = 0; i < pattern.missing.size(); ++i) {
        out << "{\"sample\": " << i << ", \"missing\": [";
        for (size_t m = 0; m < pattern.missing[i].size(); ++m) {
            if (m) out << ", ";
            out << (pattern.missing[i][m] ? "true" : "false");
        }
        out << "]}\n";
    }
    return out.str();
}

}  // namespace rep
