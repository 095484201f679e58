#pragma once

#include <stdexcept>
#include <string>

namespace arbiter {

/// Base class for all toolkit errors so callers can catch one type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Rejection sampling failed to produce a value within the iteration cap.
class SamplingError : public Error {
public:
    explicit SamplingError(const std::string& msg) : Error(msg) {}
};

/// Scene placement could not satisfy the separation constraints.
class PlacementError : public Error {
public:
    explicit PlacementError(const std::string& msg) : Error(msg) {}
};

/// Audio file or format problem.
class AudioError : public Error {
public:
    explicit AudioError(const std::string& msg) : Error(msg) {}
};

/// Training aborted (e.g. non-finite loss).
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& msg) : Error(msg) {}
};

/// Malformed or missing on-disk artifact (manifest, cache, checkpoint).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace arbiter
