#pragma once

#include <stdexcept>

namespace dmib {

// Error taxonomy shared across the library. Everything derives from
// std::runtime_error so callers can catch coarsely; the CLI maps any of
// these to a one-line diagnostic and a nonzero exit.
struct DimensionError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ParameterError : std::runtime_error { using std::runtime_error::runtime_error; };
struct DataError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct UsageError : std::runtime_error { using std::runtime_error::runtime_error; };
struct TrainingError : std::runtime_error { using std::runtime_error::runtime_error; };

}  // namespace dmib
