#pragma once

#include <stdexcept>
#include <string>

namespace metaens {

// Bad inputs: malformed files, shape mismatches, stale caches, invalid
// parameter combinations. The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal invariants. The CLI maps this to exit code 3.
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace metaens
