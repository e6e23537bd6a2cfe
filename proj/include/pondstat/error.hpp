#pragma once

#include <stdexcept>
#include <string>

namespace pondstat {

/// Bad input from the caller: malformed command, unknown flag or column,
/// violated precondition. The CLI maps this to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The data itself is unusable: missing file, malformed record, I/O failure.
/// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A statistical fit could not be produced (separation, singular design).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pondstat
