#pragma once

#include <stdexcept>
#include <string>

namespace tsmr {

// Violation of a structural contract (invalid descriptor, cyclic network,
// malformed record). These indicate caller bugs, not recoverable conditions.
struct StructuralError : std::logic_error {
    explicit StructuralError(const std::string& what) : std::logic_error(what) {}
};

} // namespace tsmr
