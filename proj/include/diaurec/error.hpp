#pragma once

#include <stdexcept>
#include <string>

namespace diaurec {

enum class ErrorKind {
  Usage,
  Io,
  Parse,
  EmptyDataset,
  Alignment,
  Format,
  Shape,
  Numeric,
  Degenerate,
  InvalidArgument,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for an error kind: 1 usage, 2 data, 3 numeric.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::InvalidArgument:
      return 1;
    case ErrorKind::Io:
    case ErrorKind::Parse:
    case ErrorKind::EmptyDataset:
    case ErrorKind::Alignment:
    case ErrorKind::Format:
      return 2;
    case ErrorKind::Shape:
    case ErrorKind::Numeric:
    case ErrorKind::Degenerate:
      return 3;
  }
  return 3;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace diaurec
