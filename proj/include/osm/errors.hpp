#pragma once

#include <stdexcept>
#include <string>

namespace osm {

// Bad user input: config values, malformed files, CLI arguments.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken caller contract: shape mismatches, labels out of range.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Filesystem / parse failures, reported with path or line context.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged (NaN loss) or data generation failed.
struct RuntimeFailure : std::runtime_error {
    explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace osm
