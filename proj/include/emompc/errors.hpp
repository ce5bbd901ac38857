#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace emompc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class EmptySetError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A callback returned NaN/Inf. Carries the point at which it happened.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::vector<double> point)
        : Error(what), point_(std::move(point)) {}

    const std::vector<double>& point() const noexcept { return point_; }

private:
    std::vector<double> point_;
};

/// Integration produced a non-finite state.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class DegenerateFrontError : public Error {
public:
    using Error::Error;
};

class FrontTraceError : public Error {
public:
    using Error::Error;
};

class SingularProjectionError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class LoadError : public Error {
public:
    using Error::Error;
};

class VersionError : public LoadError {
public:
    using LoadError::LoadError;
};

class ChecksumError : public LoadError {
public:
    using LoadError::LoadError;
};

}  // namespace emompc
