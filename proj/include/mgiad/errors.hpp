#pragma once

#include <stdexcept>
#include <string>

namespace mgiad {

// Invalid model/run configuration (bad shapes, indivisible ladders, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files (IDX, CIFAR binaries, config files, checkpoints).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse (backward without forward, oracle beyond safety bound, ...).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mgiad
