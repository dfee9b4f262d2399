#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace facade {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error
{
public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
    : Error(source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what)
    , line_(line)
  {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Versioned binary/text formats that cannot be read by this build.
class FormatError : public Error
{
public:
  using Error::Error;
};

} // namespace facade
