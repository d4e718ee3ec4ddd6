#pragma once

#include <stdexcept>
#include <string>

namespace hemocnn {

// Every failure the library reports derives from Error. The CLI maps the
// concrete types onto exit codes (see cli.hpp).

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A network or training configuration that cannot be built or run.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A class label outside [0, K).
class LabelError : public Error {
public:
    LabelError(const std::string& what, std::size_t sample)
        : Error(what), sample_(sample) {}

    std::size_t sample() const noexcept { return sample_; }

private:
    std::size_t sample_;
};

/// Dataset layout problems (missing root, too few classes, empty class...).
class DataError : public Error {
public:
    enum class Kind { MissingRoot, TooFewClasses, EmptyClass, ClassMismatch, Io };

    DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// An image file that could not be decoded.
class DecodeError : public Error {
public:
    DecodeError(const std::string& path, const std::string& why)
        : Error("cannot decode '" + path + "': " + why), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class CheckpointError : public Error {
public:
    enum class Kind { Io, BadMagic, UnsupportedVersion, Truncated, ShapeMismatch, Malformed };

    CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace hemocnn
