// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>

namespace rep {

// Number of worker threads parallel loops use. 0 = hardware concurrency.
// REP_THREADS in the environment overrides the default at first use.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, n). Each index is processed exactly once; results
// must be written to per-index slots so the outcome is independent of the
// thread count and of scheduling order.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace rep
