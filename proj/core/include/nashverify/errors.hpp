#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nashverify {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Fixed-point iteration hit its iteration cap. Carries the last iterate.
class NonConvergence : public Error {
 public:
  NonConvergence(std::string message, std::vector<double> last_iterate, std::size_t iterations)
      : Error(std::move(message)), last_iterate_(std::move(last_iterate)), iterations_(iterations) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::vector<double> last_iterate_;
  std::size_t iterations_;
};

/// Model output without a usable numeric score.
class ParseError : public Error {
 public:
  explicit ParseError(std::string offending_text)
      : Error("no numeric score in model output: \"" + offending_text + "\""),
        text_(std::move(offending_text)) {}

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

class TemplateError : public Error {
 public:
  explicit TemplateError(std::string placeholder)
      : Error("unresolved template placeholder {" + placeholder + "}"),
        placeholder_(std::move(placeholder)) {}

  const std::string& placeholder() const noexcept { return placeholder_; }

 private:
  std::string placeholder_;
};

/// Transport, HTTP or exhausted-retry failure talking to a model endpoint.
class BackendError : public Error {
 public:
  explicit BackendError(std::string message, std::optional<int> status = std::nullopt,
                        bool retryable = true)
      : Error(std::move(message)), status_(status), retryable_(retryable) {}

  std::optional<int> status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::optional<int> status_;
  bool retryable_;
};

/// Malformed or exhausted fixture data.
class FixtureError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class FileError : public Error {
 public:
  FileError(std::string path, const std::string& message)
      : Error(message + ": " + path), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace nashverify
