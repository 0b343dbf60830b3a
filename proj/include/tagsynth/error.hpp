#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tagsynth {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input does not match the expected file schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Input parses but violates a semantic invariant (dangling ids, ranges, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

// Retries exhausted on timeouts, 5xx or 429 responses.
class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

// Non-retryable provider failure (4xx other than 429, missing mock reply).
class PermanentProviderError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class StructuredOutputError : public ProviderError {
 public:
  StructuredOutputError(const std::string& what, std::string raw)
      : ProviderError(what), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace tagsynth
