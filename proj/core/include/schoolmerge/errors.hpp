#pragma once

#include <stdexcept>
#include <string>

namespace schoolmerge {

// Error taxonomy mirrored by the CLI exit codes: validation 1, numerical 2, io 3.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace schoolmerge
