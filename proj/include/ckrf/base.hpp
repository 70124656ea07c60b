#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ckrf {

using Vec = std::vector<double>;

// Invalid scenario / run configuration. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A density that must be positive is not (metric lost ellipticity outside the
// controlled time-step path).
struct DegenerateMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Blow-up rate fit could not be performed on the given samples.
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ckrf
