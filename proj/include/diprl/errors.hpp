#pragma once

#include <stdexcept>
#include <string>

namespace diprl {

// Every failure the library reports derives from Error so callers can catch
// one type at the CLI boundary.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ProtocolError : Error { using Error::Error; };
struct SamplingError : Error { using Error::Error; };
struct ExpertError : Error { using Error::Error; };
struct TrainingError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };
struct SummaryError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace diprl
