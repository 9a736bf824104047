#pragma once

#include <stdexcept>
#include <string>

namespace poisonmark {

// Base class for everything the toolkit throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad argument values: q > d, empty score lists, missing sample ids, ...
class ArgumentError : public Error {
public:
    using Error::Error;
};

// A value left its allowed interval (data outside [0,1], strict-mode overflow).
class RangeError : public Error {
public:
    using Error::Error;
};

// NaN or infinity where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Mismatched dimensions between key, rows, deltas.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed files: bad magic, version, truncation, unparsable JSON/CSV.
class FormatError : public Error {
public:
    using Error::Error;
};

// Scheme/mode mismatches: concurrent key from a post partition, poison
// support intersecting the watermark dimensions, violated preconditions.
class ModeError : public Error {
public:
    using Error::Error;
};

}  // namespace poisonmark
