#pragma once

#include <stdexcept>
#include <string>

namespace vortlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GeometryError : public Error { using Error::Error; };
class ExtrapolationError : public Error { using Error::Error; };
class SolverError : public Error { using Error::Error; };
class CompatibilityError : public Error { using Error::Error; };
class PointOutsideFluid : public Error { using Error::Error; };
class CFLViolation : public Error { using Error::Error; };
class NonFiniteField : public Error { using Error::Error; };
class CoincidentPoints : public Error { using Error::Error; };
class IncompleteRecord : public Error { using Error::Error; };
class NotC0TestFunction : public Error { using Error::Error; };
class NonConvexGauge : public Error { using Error::Error; };
class NotUniformlyIntegrable : public Error { using Error::Error; };
class HypothesisViolated : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

/// Scenario text could not be parsed; carries the offending line and field.
class ParseError : public Error {
public:
    ParseError(int line, std::string field, const std::string& what)
        : Error("line " + std::to_string(line) + ", field '" + field + "': " + what),
          line_(line), field_(std::move(field)) {}
    int line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    int line_;
    std::string field_;
};

} // namespace vortlab
