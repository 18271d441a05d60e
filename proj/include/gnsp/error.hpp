#ifndef GNSP_ERROR_HPP
#define GNSP_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnsp {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ValueError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Training failures carry the iteration index at which they occurred.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t iteration)
        : Error(what), iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class CheckpointFormatError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class CheckpointVersionError : public CheckpointError {
public:
    CheckpointVersionError(unsigned found, unsigned expected)
        : CheckpointError("checkpoint version mismatch: file has version " + std::to_string(found) +
                          ", this build reads version " + std::to_string(expected)),
          found_(found), expected_(expected) {}
    unsigned found() const noexcept { return found_; }
    unsigned expected() const noexcept { return expected_; }

private:
    unsigned found_;
    unsigned expected_;
};

class CheckpointTruncatedError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class CheckpointChecksumError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

}  // namespace gnsp

#endif  // GNSP_ERROR_HPP
