#pragma once

#include <stdexcept>
#include <string>

namespace gfuzz {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed corpus/model/config text.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A block instance cannot absorb the degree its graph node realizes.
class WiringError : public Error {
 public:
  using Error::Error;
};

// Candidate model rejected during generation; the caller retries.
class GenerationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  ShapeError(int node, const std::string& what)
      : Error("node " + std::to_string(node) + ": " + what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

// Disk, subprocess or protocol failures. Never an engine exception.
class InfraError : public Error {
 public:
  using Error::Error;
};

}  // namespace gfuzz
