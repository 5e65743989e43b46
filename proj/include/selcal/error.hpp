#pragma once

#include <stdexcept>
#include <string>

namespace selcal {

// Error taxonomy shared by every module. Messages are prefixed with the
// owning module ("synthdata: ...") so CLI diagnostics carry provenance.

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when a selection keeps no examples (all-zero g).
struct DegenerateSelectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a binned estimator has fewer selected rows than a bin needs.
struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <typename E>
[[noreturn]] inline void fail(const char* module, const std::string& what) {
    throw E(std::string(module) + ": " + what);
}

}  // namespace detail

}  // namespace selcal
