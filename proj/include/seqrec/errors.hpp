#pragma once

#include <stdexcept>
#include <string>

namespace seqrec {

// Base error. `category()` is stable and machine-parsable; the CLI prints it
// and maps it to an exit code.
class Error : public std::runtime_error {
public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

private:
  std::string category_;
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

// Carries the 1-based line number of the offending input line.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("parse", "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class DataError : public Error {
public:
  explicit DataError(const std::string& what) : Error("data", what) {}
};

class ModelError : public Error {
public:
  explicit ModelError(const std::string& what) : Error("model", what) {}
};

class TrainingError : public Error {
public:
  explicit TrainingError(const std::string& what) : Error("training", what) {}
};

}  // namespace seqrec
