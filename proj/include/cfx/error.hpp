// Error taxonomy shared by all cfxlab components.
#pragma once

#include <stdexcept>
#include <string>

namespace cfx {

// Bad configuration: invalid architecture, invalid config file, inconsistent
// options. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad runtime input: non-finite features, dimension mismatch, empty batch.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Optimization blew up (non-finite loss or parameters).
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cfx
