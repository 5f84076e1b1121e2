#pragma once

#include <stdexcept>
#include <string>

namespace deconf {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Scenario target cannot be bracketed by the root finder.
class NoBracketError : public Error {
public:
    using Error::Error;
};

// Malformed or unusable user input (files, labels, flags).
class InputError : public Error {
public:
    using Error::Error;
};

} // namespace deconf
