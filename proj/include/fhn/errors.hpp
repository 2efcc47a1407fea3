#pragma once

#include <stdexcept>
#include <string>

namespace fhn {

// Parameter outside its admissible range (bad alpha, negative scale, ...).
struct param_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Grid misalignment or window underflow (off-grid shift, quadrature window
// outside the sampled path, window mismatch between vectors).
struct grid_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Not enough data to evaluate a statistic (window too short, empty set).
struct data_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Config file problems: unknown key, type mismatch, constraint violation.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runtime diagnostics: energy blow-up, exp overflow guard, step-size bound.
// These abort a run; ensemble drivers count them instead of hiding them.
struct diagnostic_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace fhn
