#pragma once

#include <stdexcept>
#include <string>

namespace ksyn {

// Error taxonomy mirrored by the CLI exit codes: invalid input -> 2,
// data/parse -> 3, numeric failure -> 4, task failure -> 5.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class TaskFailure : public Error {
public:
    using Error::Error;
};

// Fingertip goals outside the hand workspace.
class ReachabilityError : public TaskFailure {
public:
    using TaskFailure::TaskFailure;
};

// Virtual object never touched within the tick budget.
class GraspFailure : public TaskFailure {
public:
    using TaskFailure::TaskFailure;
};

} // namespace ksyn
