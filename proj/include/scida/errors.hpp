#pragma once

#include <stdexcept>
#include <string>

namespace scida {

// Invalid configuration or malformed input files. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched tensor/vector dimensions.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing files, unreadable images, schema violations while loading data.
struct LoadError : std::runtime_error {
    explicit LoadError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated an operation's preconditions (e.g. unlabeled batch fed
// to a supervised step).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss detected during training. CLI exit code 3.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace scida
