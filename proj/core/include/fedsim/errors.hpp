#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Bad run configuration: unknown keys, missing fields, out-of-range values.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched tensor/vector shapes or otherwise invalid arguments to a
// numeric routine.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss. The CLI maps this to exit code 3.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File missing, unreadable, or malformed on disk. The CLI maps this to
// exit code 4.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedsim
