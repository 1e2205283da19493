#pragma once

#include <stdexcept>
#include <string>

namespace segan {

// Error taxonomy. Shape errors are programming/config mistakes caught at op
// boundaries; data errors come from files or label codes; numeric errors are
// NaN/Inf escapes and carry the offending parameter path when known; config
// errors name the bad key or path.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

}  // namespace segan
