#pragma once

#include <stdexcept>
#include <string>

namespace leanloc {

enum class ErrorKind {
  Config,     // invalid parameters or config file
  Parse,      // malformed input file
  Integrity,  // inconsistent data (duplicate ids, coverage gaps, ...)
  Io,         // filesystem failures
  Domain,     // value outside the domain of an operation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace leanloc
