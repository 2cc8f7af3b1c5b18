#pragma once

#include <stdexcept>
#include <string>

namespace caest {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid window / study configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Caller broke an argument precondition (wrong length, out-of-range size).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Input data rejected (non-finite values, dimension mismatch in a stream).
class DataError : public Error {
public:
    using Error::Error;
};

/// A per-window estimator could not produce an estimate.
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Parameters outside the model's admissible region.
class DomainError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class DegenerateSampleError : public Error {
public:
    using Error::Error;
};

/// Operations on the online state called out of sequence.
class ContractError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace caest
