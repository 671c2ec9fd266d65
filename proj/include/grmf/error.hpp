#pragma once

#include <stdexcept>
#include <string>

namespace grmf {

// Raised when an iterate, weight or penalty parameter becomes non-finite or a
// closed-form update has a non-positive curvature.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable input data (files, matrices with NaN, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ParseErrorKind {
  Io,
  MalformedHeader,
  TruncatedPayload,
  UnsupportedMaxval,
  InvalidSample,
  RaggedRows,
  NonNumeric,
};

inline const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::Io: return "io";
    case ParseErrorKind::MalformedHeader: return "malformed header";
    case ParseErrorKind::TruncatedPayload: return "truncated payload";
    case ParseErrorKind::UnsupportedMaxval: return "unsupported maxval";
    case ParseErrorKind::InvalidSample: return "invalid sample";
    case ParseErrorKind::RaggedRows: return "ragged rows";
    case ParseErrorKind::NonNumeric: return "non-numeric cell";
  }
  return "unknown";
}

class ParseError : public DataError {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : DataError(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

}  // namespace grmf
