#pragma once

#include <stdexcept>
#include <string>

namespace rbc {

/// Operands from different fields, or an API used outside its contract.
class usage_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A documented precondition of an algorithm does not hold for its input.
class precondition_violation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid configuration. `field()` names the offending entry, e.g. "config.k".
class config_error : public std::invalid_argument {
public:
    config_error(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Exhaustive search refused because the instance exceeds the work budget.
class resource_guard_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An agent tried to use information outside its past light cone.
class causality_violation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace rbc
