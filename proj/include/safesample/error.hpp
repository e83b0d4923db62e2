#pragma once

#include <stdexcept>
#include <string>

namespace safesample {

/// Root of every error the toolkit throws. The CLI maps the three direct
/// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration, flags, or missing input paths.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a schema or a precondition.
class DataError : public Error {
 public:
  using Error::Error;
};

/// An external classifier endpoint failed or misbehaved.
class ClientError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& where, std::size_t line, const std::string& what)
      : DataError(where + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateIdError : public DataError {
 public:
  explicit DuplicateIdError(const std::string& id)
      : DataError("duplicate id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class MissingLabelError : public DataError {
 public:
  MissingLabelError(const std::string& id, const std::string& label)
      : DataError("example '" + id + "' has no " + label + " label"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class MissingEmbeddingError : public DataError {
 public:
  explicit MissingEmbeddingError(const std::string& id)
      : DataError("no embedding for id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class DimensionMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class ZeroNormError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

class PreconditionError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace safesample
