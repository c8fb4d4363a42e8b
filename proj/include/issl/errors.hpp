#pragma once

#include <stdexcept>
#include <string>

namespace issl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argmax of a conditional row is not unique.
struct TieError : Error {
    using Error::Error;
};

// Enumeration or subset-sum guard tripped (2^C style blowup).
struct CapacityError : Error {
    using Error::Error;
};

// Requested ambient dimension too small for the construction.
struct DimensionError : Error {
    using Error::Error;
};

struct ZeroRowError : Error {
    using Error::Error;
};

struct DuplicatePointError : Error {
    using Error::Error;
};

struct PreconditionError : Error {
    using Error::Error;
};

// Encoder handed to the worst-ERM oracle is not invariant + shattered.
struct NotSampleOptimalEncoderError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct DegenerateClassError : Error {
    using Error::Error;
};

struct SizeMismatchError : Error {
    using Error::Error;
};

// Config / input-file validation failure (CLI exit code 2).
struct ValidationError : Error {
    using Error::Error;
};

}  // namespace issl
