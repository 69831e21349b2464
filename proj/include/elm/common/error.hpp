#pragma once

#include <stdexcept>
#include <string>

namespace elm {

// Runtime failure: I/O, backend, numerical. CLI exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input or configuration. CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace elm
