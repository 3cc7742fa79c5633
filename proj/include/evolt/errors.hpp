#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evolt {

// Error taxonomy mirrors the CLI exit codes: configuration problems exit 1,
// data problems exit 2, per-cell training/eval failures exit 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed config file, invalid parameter set, schema violations.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Problems with input data files: missing columns, bad timestamps, absent cycles.
class DataError : public Error {
public:
    using Error::Error;
};

// Numeric operation called with arguments outside its contract.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Training failures (divergence, non-finite activations).
class TrainingError : public Error {
public:
    using Error::Error;
    TrainingError(const std::string& what, std::size_t epoch)
        : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch), has_epoch_(true) {}
    bool has_epoch() const { return has_epoch_; }
    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_ = 0;
    bool has_epoch_ = false;
};

// ECM parameter identification failures (degenerate segments, no convergence).
class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace evolt
