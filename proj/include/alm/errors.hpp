#pragma once
#include <stdexcept>
#include <string>

namespace alm {

// Numerical failures. The CLI maps these to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };
struct OrderingError : Error { using Error::Error; };
struct ConsistencyError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct AlignmentError : Error { using Error::Error; };
struct IntegrationError : Error { using Error::Error; };
struct BoundaryError : Error { using Error::Error; };
struct BoundsError : Error { using Error::Error; };
struct LayoutError : Error { using Error::Error; };
struct SpreadSignError : Error { using Error::Error; };
struct UnsupportedDriverError : Error { using Error::Error; };
struct DegenerateError : Error { using Error::Error; };
struct CalibrationError : Error { using Error::Error; };

// Input and configuration failures. The CLI maps these to exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : InputError { using InputError::InputError; };
struct ParseError : InputError { using InputError::InputError; };

}  // namespace alm
