#pragma once

#include <stdexcept>
#include <string>

namespace dkmo {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched matrix/table dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Matrix expected symmetric but is not.
class SymmetryError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    using Error::Error;
};

class NotPsdError : public Error {
public:
    using Error::Error;
};

// Invalid argument values (non-finite features, bad gamma, bad indices, ...).
class InputError : public Error {
public:
    using Error::Error;
};

// Malformed input file; message names the file and row.
class IngestError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Model cannot map the given input (missing kernel, wrong widths, ...).
class BindingError : public Error {
public:
    using Error::Error;
};

}  // namespace dkmo
