#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hbc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text or bytes. `position` is a 1-based line number for text
// formats and a byte offset for binary ones.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument does not hold.
class InputError : public Error {
 public:
  using Error::Error;
};

// Non-finite activations, diverging loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage is missing an artifact produced by an earlier stage.
class MissingArtifact : public Error {
 public:
  MissingArtifact(const std::string& what, std::string stage)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace hbc
