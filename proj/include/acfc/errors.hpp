#pragma once

#include <stdexcept>
#include <string>

namespace acfc {

// network cannot be solved at the requested frequency (rank-deficient admittance system)
class singular_network : public std::runtime_error {
public:
    explicit singular_network(const std::string& what) : std::runtime_error(what) {}
};

// time stepping failed: state went non-finite or an event could not be bracketed
class integration_error : public std::runtime_error {
public:
    explicit integration_error(const std::string& what) : std::runtime_error(what) {}
};

// an operation was called on input that violates its stated precondition
class precondition_error : public std::logic_error {
public:
    explicit precondition_error(const std::string& what) : std::logic_error(what) {}
};

// configuration / CLI input is invalid; message names the offending field
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace acfc
