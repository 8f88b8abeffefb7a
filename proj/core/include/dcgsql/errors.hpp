#pragma once

#include <stdexcept>
#include <string>

namespace dcgsql {

/// Base error for anything raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Problems with user-supplied inputs (files, flags, malformed data).
/// The CLI maps these to exit code 1; everything else is exit code 2.
struct UserError : Error {
  explicit UserError(const std::string& msg) : Error(msg) {}
};

struct SqlParseError : UserError {
  SqlParseError(const std::string& msg, std::size_t offset)
      : UserError(msg + " (at offset " + std::to_string(offset) + ")"),
        offset(offset) {}
  std::size_t offset;
};

}  // namespace dcgsql
