#pragma once

#include <stdexcept>
#include <string>

namespace mfbesq {

// Raised when a model violates the coefficient assumptions (Lipschitz drift,
// positive drift at the origin, bounded nonnegative interaction intensity,
// strictly positive bounded volatility factor, positive initial mean).
// The message names the violated assumption. CLI maps this to exit code 2.
struct AssumptionError : std::runtime_error {
    explicit AssumptionError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a computation degenerates numerically (non-finite state or
// Girsanov weight, iteration failing to converge). CLI maps this to exit 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mfbesq
