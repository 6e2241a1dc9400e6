#pragma once

#include <stdexcept>
#include <string>

namespace ldmt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration values (unsupported schedule family, empty ranges, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Arguments outside an operation's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Object not in a usable state (e.g. pipeline invoked on an untrained model).
class StateError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class ResourceError : public Error {
public:
    using Error::Error;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ProcessingError : public Error {
public:
    using Error::Error;
};

class ComparabilityError : public Error {
public:
    using Error::Error;
};

}  // namespace ldmt
