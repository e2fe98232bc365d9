#pragma once

#include <stdexcept>
#include <string>

#include "coredel/ast.hpp"

namespace coredel {

// Base for all user-facing diagnostics; `code` is a stable machine-readable
// name ("TypeMismatch", "PivotUncertain", ...), `span` points into the source.
class CdlError : public std::runtime_error {
public:
    CdlError(std::string code, const std::string& message, SourceSpan span = {})
        : std::runtime_error(message), code_(std::move(code)), span_(span) {}

    const std::string& code() const { return code_; }
    const SourceSpan& span() const { return span_; }

private:
    std::string code_;
    SourceSpan span_;
};

class ParseError : public CdlError {
public:
    using CdlError::CdlError;
};

class TypeError : public CdlError {
public:
    using CdlError::CdlError;
};

// binding-time analysis stage (conflicts, duplicate definitions)
class BtaError : public CdlError {
public:
    using CdlError::CdlError;
};

enum class SpecErrorKind {
    IndexOutOfBounds,
    NonVariablePartialTarget,
    StaticCycle,
    ArityError,
    DivisionByZero,
    NonDifferentiable,
};

std::string spec_error_kind_name(SpecErrorKind k);

class SpecError : public CdlError {
public:
    SpecError(SpecErrorKind kind, const std::string& detail, SourceSpan span = {})
        : CdlError(spec_error_kind_name(kind), detail, span), kind_(kind) {}
    SpecErrorKind kind() const { return kind_; }

private:
    SpecErrorKind kind_;
};

// explicitization stage (pivot certification, linearity, model shape)
class ModelError : public CdlError {
public:
    using CdlError::CdlError;
};

} // namespace coredel
