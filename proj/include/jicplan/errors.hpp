#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "plan.hpp"

namespace jicplan {

class PlanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed document text. `position` is a 1-based byte offset.
class SyntaxError : public PlanError {
public:
    SyntaxError(const std::string& what, std::size_t position) : PlanError(what), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Well-formed document that does not follow the scenario schema.
class SchemaError : public PlanError {
public:
    using PlanError::PlanError;
};

/// Schema-conforming plan that breaks one or more type invariants.
class ValidationError : public PlanError {
public:
    explicit ValidationError(ValidationReport report)
        : PlanError(summarize(report)), report_(std::move(report)) {}
    const ValidationReport& report() const { return report_; }

private:
    static std::string summarize(const ValidationReport& r) {
        std::string s = "plan validation failed:";
        for (const auto& v : r) s += "\n  " + v.subject + ": " + v.message;
        return s;
    }
    ValidationReport report_;
};

/// Caller broke an operation's precondition (e.g. a policy that does not
/// cover a reached branch point).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace jicplan
