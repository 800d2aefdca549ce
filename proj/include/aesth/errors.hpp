#ifndef AESTH_ERRORS_HPP_
#define AESTH_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace aesth {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor dimensions incompatible with the requested operation.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

/// Invalid model or pipeline configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Malformed or truncated binary file (TNSR, TAPN, PPM).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(what) {}
};

/// Malformed text input (manifest CSV, config file). Carries row context in the message.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what) {}
};

/// Numeric input outside its documented range.
class RangeError : public Error {
public:
    explicit RangeError(const std::string& what) : Error(what) {}
};

/// Index outside a container or attribute list.
class IndexError : public Error {
public:
    explicit IndexError(const std::string& what) : Error(what) {}
};

/// Batch statistics cannot be computed (train-mode batch norm on < 2 elements).
class DegenerateBatchError : public Error {
public:
    explicit DegenerateBatchError(const std::string& what) : Error(what) {}
};

/// Rank correlation undefined (n < 2 or a constant input vector).
class UndefinedCorrelation : public Error {
public:
    explicit UndefinedCorrelation(const std::string& what) : Error(what) {}
};

}  // namespace aesth

#endif  // AESTH_ERRORS_HPP_
