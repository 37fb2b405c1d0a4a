#pragma once

#include <stdexcept>
#include <string>

namespace besselh {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The stopping functional never exceeds 1 going up the dyadic tree (e.g. V == 0).
class DegeneratePotential : public Error {
public:
    using Error::Error;
};

/// A potential that is not locally integrable against x^alpha dx.
class NonLocallyIntegrable : public Error {
public:
    using Error::Error;
};

class SupportViolation : public Error {
public:
    using Error::Error;
};

class CutoffViolation : public Error {
public:
    using Error::Error;
};

class BalanceUnreachable : public Error {
public:
    using Error::Error;
};

class MixedGrids : public Error {
public:
    using Error::Error;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

class FeynmanKacError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; `line` is 1-based (0 when not applicable).
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace besselh
