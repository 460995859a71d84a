#pragma once

#include <stdexcept>
#include <string>

namespace qkdsim {

// Raised for malformed or out-of-range experiment configuration. CLI exit code 1.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised for unreadable/unwritable paths. CLI exit code 2.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a statistic has an empty denominator (no counts collected). CLI exit code 3.
struct no_counts_error : std::runtime_error {
  explicit no_counts_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qkdsim
