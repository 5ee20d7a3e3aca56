#pragma once

#include <stdexcept>
#include <string>

namespace hreid {

// Bad input data or configuration. The CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / format failures. The CLI maps this to exit code 1.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hreid
