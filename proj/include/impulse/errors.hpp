#ifndef IMPULSE_ERRORS_HPP
#define IMPULSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace impulse {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct NoBracket : Error { using Error::Error; };
struct InvalidThreshold : Error { using Error::Error; };
struct MaxIterations : Error { using Error::Error; };
struct MaxSteps : Error { using Error::Error; };
struct StabilityViolation : Error { using Error::Error; };
struct GridMismatch : Error { using Error::Error; };

} // namespace impulse

#endif
