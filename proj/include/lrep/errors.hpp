#pragma once

#include <stdexcept>
#include <string>

namespace lrep {

/// Base of every error thrown by the library. `kind()` is a stable short tag
/// used in structured CLI error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error("format", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line)
        : Error("parse", "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class MissingFeatureError : public Error {
public:
    MissingFeatureError(const std::string& episode_id, const std::string& phase,
                        const std::string& source_id)
        : Error("missing_feature", "missing feature for episode '" + episode_id + "' phase '" +
                                       phase + "' source '" + source_id + "'"),
          episode_id_(episode_id),
          source_id_(source_id) {}

    const std::string& episode_id() const noexcept { return episode_id_; }
    const std::string& source_id() const noexcept { return source_id_; }

private:
    std::string episode_id_;
    std::string source_id_;
};

/// No caption for (episode, phase): the narrative group cannot be built.
class MissingCaptionError : public Error {
public:
    MissingCaptionError(const std::string& episode_id, const std::string& phase)
        : Error("missing_caption",
                "missing caption for episode '" + episode_id + "' phase '" + phase + "'"),
          episode_id_(episode_id) {}

    const std::string& episode_id() const noexcept { return episode_id_; }

private:
    std::string episode_id_;
};

class EmptyKeysError : public Error {
public:
    explicit EmptyKeysError(const std::string& message) : Error("empty_keys", message) {}
};

class EmptyRepresentationError : public Error {
public:
    explicit EmptyRepresentationError(const std::string& message)
        : Error("empty_representation", message) {}
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& message) : Error("training", message) {}
};

}  // namespace lrep
