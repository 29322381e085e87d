#pragma once

#include <stdexcept>
#include <string>

namespace sysid {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two objects that must share a layout (bounds vs. vector, control vs. control bounds) do not.
class StructuralError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A simulator state became non-finite or exceeded the divergence guard.
class DivergedSimulation : public Error {
public:
    DivergedSimulation(const std::string& what, long first_bad_step, double time_s)
        : Error(what), first_bad_step_(first_bad_step), time_s_(time_s) {}

    long first_bad_step() const noexcept { return first_bad_step_; }
    double time_seconds() const noexcept { return time_s_; }

private:
    long first_bad_step_;
    double time_s_;
};

class InsufficientOverlap : public Error {
public:
    using Error::Error;
};

class MetricMismatch : public Error {
public:
    using Error::Error;
};

class DegenerateMask : public Error {
public:
    using Error::Error;
};

class UnrecoverablePerception : public Error {
public:
    using Error::Error;
};

/// Remote recommender could not be reached after all retries.
class RecommenderUnavailable : public Error {
public:
    using Error::Error;
};

/// Recommender output did not match the response schema, even after a re-prompt.
class ParseFailure : public Error {
public:
    using Error::Error;
};

class NoValidIteration : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace sysid
