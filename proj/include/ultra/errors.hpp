#pragma once

#include <stdexcept>
#include <string>

namespace ultra {

struct TypeMismatchError : std::runtime_error {
    explicit TypeMismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TerminalMisuseError : std::runtime_error {
    explicit TerminalMisuseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct OrderingError : std::runtime_error {
    explicit OrderingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingRewardError : ParseError {
    explicit MissingRewardError(const std::string& msg) : ParseError(msg) {}
};

struct EmptyWindowError : std::runtime_error {
    explicit EmptyWindowError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IncompleteEpisodeError : std::runtime_error {
    explicit IncompleteEpisodeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct OracleUnsupportedEnvError : std::runtime_error {
    explicit OracleUnsupportedEnvError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NetworkError : std::runtime_error {
    explicit NetworkError(const std::string& msg) : std::runtime_error(msg) {}
};

struct AuthenticationError : std::runtime_error {
    explicit AuthenticationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DanglingAnnotationError : std::runtime_error {
    explicit DanglingAnnotationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatchError : std::runtime_error {
    explicit ShapeMismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonFiniteGradientError : std::runtime_error {
    explicit NonFiniteGradientError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingDependencyError : std::runtime_error {
    explicit MissingDependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ultra
