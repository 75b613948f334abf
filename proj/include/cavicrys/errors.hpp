#pragma once

#include <stdexcept>
#include <string>

namespace cavicrys {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameter value, mode index, method selection or request shape.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Hermite order above the supported cap.
class UnsupportedOrderError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Mathematically undefined request (e.g. normalization by a zero reference).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Config-file syntax or unknown-key failure; carries the 1-based line.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Requested tolerance not reached; carries the best available estimate.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& msg, double best_estimate, double est_rel_error)
        : Error(msg), best_estimate_(best_estimate), est_rel_error_(est_rel_error) {}
    double best_estimate() const { return best_estimate_; }
    double est_rel_error() const { return est_rel_error_; }

private:
    double best_estimate_;
    double est_rel_error_;
};

/// No usable peak in the data handed to a fit.
class FitDegenerateError : public Error {
public:
    using Error::Error;
};

/// Fit problem without enough leverage to determine its parameters.
class IllConditionedError : public Error {
public:
    using Error::Error;
};

}  // namespace cavicrys
