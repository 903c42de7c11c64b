#ifndef ENDPT_ERRORS_HPP
#define ENDPT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace endpt {

/// Bad input: malformed text, dimension mismatch, violated precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text that failed to parse; carries a 1-based line and column.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : ValidationError(what + " (line " + std::to_string(line) + ", column " +
                        std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Numerical breakdown: non-finite state, failed convergence, singular solve.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace endpt

#endif  // ENDPT_ERRORS_HPP
