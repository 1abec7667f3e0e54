#pragma once

#include <stdexcept>
#include <string>

namespace ouve {

// Stable exit-code contract for the CLI: 2 usage, 3 data, 4 numerical.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ouve
