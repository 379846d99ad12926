#pragma once

#include <stdexcept>
#include <string>

namespace mflab {

// Error taxonomy mirrors the CLI exit codes: schema_error -> 2,
// numerical failures -> 3, invariant violations -> 4.
struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct size_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct schema_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct integration_error : std::runtime_error {
    double last_valid_time;
    integration_error(const std::string& what, double t_last)
        : std::runtime_error(what + " (last valid time t=" + std::to_string(t_last) + ")"),
          last_valid_time(t_last) {}
};

struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct inconsistency_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invariant_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mflab
