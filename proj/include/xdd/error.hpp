#pragma once

#include <stdexcept>
#include <string>

namespace xdd {

/// Root of every error raised by the library. CLI exit codes are derived
/// from the concrete subclass (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

/// Raised by the gradient checker when the loss function is not a pure
/// function of its parameters.
class OracleError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Every token of a post is masked out, so no explanation can be formed.
class NoContentWords : public Error {
 public:
  explicit NoContentWords(const std::string& post_id)
      : Error("post '" + post_id + "' has no attention-eligible words"),
        post_id_(post_id) {}
  const std::string& post_id() const noexcept { return post_id_; }

 private:
  std::string post_id_;
};

}  // namespace xdd
