#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace octmix {

/// Base of every error raised by the library. Each subclass names one failure
/// category so callers (and the CLI's exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

class InvalidSpecError : public Error {
public:
    using Error::Error;
};

class InvalidParameterError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class WindowTooShortError : public ShapeError {
public:
    using ShapeError::ShapeError;
};

class ChannelGroupingError : public ShapeError {
public:
    using ShapeError::ShapeError;
};

class ContractViolationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class MissingFileError : public Error {
public:
    using Error::Error;
};

class InsufficientSubjectsError : public Error {
public:
    using Error::Error;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class UnknownVariantError : public Error {
public:
    using Error::Error;
};

/// Carries every problem found in a config, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(message), problems_{message} {}
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& item : items) out += (out.empty() ? "" : "\n") + item;
        return out;
    }

    std::vector<std::string> problems_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace octmix
