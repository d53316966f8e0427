#pragma once

#include <stdexcept>
#include <string>

namespace pad {

// Base error for everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid input data: manifests, samples, configs, checkpoints.
// The CLI maps this to exit code 2.
struct DataError : Error {
    using Error::Error;
};

// Numeric failure: non-finite loss, degenerate metric inputs.
// The CLI maps this to exit code 3.
struct NumericError : Error {
    using Error::Error;
};

} // namespace pad
