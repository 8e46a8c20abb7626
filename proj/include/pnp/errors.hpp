#pragma once

#include <stdexcept>
#include <string>

namespace pnp {

// Bad user input: malformed config, invalid hyper-parameter, unreadable file,
// violated precondition on caller-supplied data. CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Inputs whose geometry makes an operation undefined (zero-norm vectors).
class DegenerateInputError : public std::domain_error {
 public:
  explicit DegenerateInputError(const std::string& what)
      : std::domain_error(what) {}
};

// Divergence, non-finite values, failed gradient checks. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed CSV / checkpoint content. Carries the 1-based line when known.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ConfigError(line == 0 ? what
                              : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pnp
