// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rep/tensor.hpp"

namespace rep {

// Ordered collection of named parameter tensors. Values are stored detached;
// insertion order is the canonical order for optimizer state and gradient
// reduction. Names are namespaced by prefix: "backbone/", "head/", "rep/".
class ParamStore {
public:
    Tensor& add(std::string name, Tensor value);
    bool contains(std::string_view name) const;
    const Tensor& get(std::string_view name) const;
    void set(std::string_view name, Tensor value);  // shape must match

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }

    int64_t count_params(std::string_view prefix = "") const;
    std::vector<std::string> names(std::string_view prefix = "") const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, size_t> index_;
};

// Parameters as seen by one forward pass: trainable entries are leaves of
// `graph`, everything else stays a detached value.
class Bindings {
public:
    Bindings() = default;
    // `trainable` decides by name; null graph binds everything detached.
    Bindings(const ParamStore& store, const GraphPtr& graph,
             const std::function<bool(std::string_view)>& trainable);

    const Tensor& at(std::string_view name) const;
    Bindings with(std::string name, Tensor t) const;  // add/override one entry

private:
    std::unordered_map<std::string, Tensor> map_;
};

}  // namespace rep
