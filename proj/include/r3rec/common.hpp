#pragma once
/// @file common.hpp
/// @brief Error types and logging shared by every module.

#include <stdexcept>
#include <string>
#include <string_view>

namespace r3rec {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller passed input that violates an operation's precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A remote service kept failing after the configured retries.
class RetryExhausted : public Error {
public:
    using Error::Error;
};

/// Input data could not be parsed (strict mode) or a file could not be read.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Evaluation protocol was violated (e.g. ground truth missing from a ranking).
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage was requested before the stages it depends on.
class DependencyError : public Error {
public:
    using Error::Error;
};

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();

// Thread-safe, writes to stderr.
void log(LogLevel level, std::string_view message);

inline void log_info(std::string_view m) { log(LogLevel::kInfo, m); }
inline void log_warn(std::string_view m) { log(LogLevel::kWarn, m); }

}  // namespace r3rec
