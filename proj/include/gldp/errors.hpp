#pragma once

#include <stdexcept>
#include <string>

namespace gldp {

/// Bad inputs: schema violations, precondition failures, out-of-range
/// parameters. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Computation could not be completed to the requested tolerance
/// (iteration caps, memory caps, overflow). CLI exit code 2.
class ComputeError : public std::runtime_error {
public:
    explicit ComputeError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gldp
