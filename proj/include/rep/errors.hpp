// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace rep {

// Base for every error the library raises on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with the requested operation.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite values, degenerate norms, NaN losses.
struct NumericalError : Error {
    using Error::Error;
};

// Bad or missing configuration. CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Config/checkpoint incompatibility. CLI maps this to exit code 3.
struct CompatError : Error {
    using Error::Error;
};

}  // namespace rep
