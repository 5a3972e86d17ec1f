#pragma once

#include <stdexcept>
#include <string>

namespace topicloop {

/// Coarse error classes. They map one-to-one onto CLI exit codes.
enum class ErrorClass { Usage, Data, Transport };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& what)
      : std::runtime_error(what), cls_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return cls_; }
  /// Short machine-readable name, e.g. "ValidationError".
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass cls_;
  std::string kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorClass::Data, "ValidationError", what) {}
};

class EmptyCorpusError : public Error {
 public:
  explicit EmptyCorpusError(const std::string& what = "empty corpus")
      : Error(ErrorClass::Data, "EmptyCorpusError", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what)
      : Error(ErrorClass::Data, "FormatError", what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what)
      : Error(ErrorClass::Data, "ParseError", what) {}
};

enum class TransportFailure { Timeout, HttpStatus, MalformedPayload, Connection };

class TransportError : public Error {
 public:
  TransportError(TransportFailure failure, const std::string& what, int attempts = 0)
      : Error(ErrorClass::Transport, kind_name(failure), what),
        failure_(failure),
        attempts_(attempts) {}

  TransportFailure failure() const noexcept { return failure_; }
  int attempts() const noexcept { return attempts_; }
  void set_attempts(int n) noexcept { attempts_ = n; }

  static std::string kind_name(TransportFailure f) {
    switch (f) {
      case TransportFailure::Timeout: return "TransportTimeout";
      case TransportFailure::HttpStatus: return "TransportHttpStatus";
      case TransportFailure::MalformedPayload: return "TransportMalformedPayload";
      case TransportFailure::Connection: return "TransportConnection";
    }
    return "TransportError";
  }

 private:
  TransportFailure failure_;
  int attempts_;
};

}  // namespace topicloop
