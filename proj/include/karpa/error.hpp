#pragma once

#include <stdexcept>
#include <string>

namespace karpa {

enum class ErrorKind {
  kConfig,    // bad configuration or arguments
  kData,      // malformed input files, unknown entities
  kProvider,  // LLM / embedding backend failures
  kContract,  // violated preconditions (dimension mismatch, bad arguments)
  kCapacity,  // resource guard tripped
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line) : DataError(what), line_(line) {}
  // 1-based line or record number; 0 when not applicable.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NotFoundError : public DataError {
 public:
  explicit NotFoundError(const std::string& what) : DataError(what) {}
};

class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : Error(ErrorKind::kProvider, what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::kContract, what) {}
};

// Raised for mathematically undefined inputs such as zero-norm vectors.
class DomainError : public ContractError {
 public:
  explicit DomainError(const std::string& what) : ContractError(what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ErrorKind::kCapacity, what) {}
};

}  // namespace karpa
