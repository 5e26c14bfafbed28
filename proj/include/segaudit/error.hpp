#pragma once

#include <stdexcept>
#include <string>

namespace segaudit {

/// Base class for every error raised by the audit library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input bytes do not follow the expected file layout (bad magic, bad header).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that uses a feature outside the supported subset.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Payload shorter than the header promises.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Operator or configuration parameter outside its legal domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

class EmptyMaskError : public Error {
public:
    using Error::Error;
};

class PairingError : public Error {
public:
    using Error::Error;
};

/// Violation of the predictor wire protocol; carries the offending line when there is one.
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& what, std::string line = {})
        : Error(line.empty() ? what : what + ": " + line), line_(std::move(line)) {}

    const std::string& line() const noexcept { return line_; }

private:
    std::string line_;
};

/// The predictor failed to answer a request (timeout, child exit, error reply).
class PredictorError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace segaudit
