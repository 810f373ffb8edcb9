#pragma once

#include <stdexcept>
#include <string>

namespace fdest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidMatrix : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class UnsupportedOrder : public Error {
public:
    using Error::Error;
};

class InvalidState : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

/// Raised when an integration produces a non-finite state.
class DivergedSimulation : public Error {
public:
    DivergedSimulation(const std::string& what, double last_finite_time)
        : Error(what), last_finite_time_(last_finite_time) {}

    double last_finite_time() const noexcept { return last_finite_time_; }

private:
    double last_finite_time_;
};

}  // namespace fdest
