#pragma once

#include <stdexcept>
#include <string>

namespace parity_bell
{

// Invalid input: bad grid, out-of-range config value, malformed file.
class ValidationError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// A numerical routine failed to produce a trustworthy result.
class NumericalError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition)
    {
        throw ValidationError(message);
    }
}

}  // namespace parity_bell
