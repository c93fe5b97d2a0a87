#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace diverid {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A pose reached feature extraction with a (near) zero-length segment.
class DegeneratePoseError : public Error {
 public:
  DegeneratePoseError(std::int64_t frame_id, const std::string& what)
      : Error(what), frame_id_(frame_id) {}
  std::int64_t frame_id() const noexcept { return frame_id_; }

 private:
  std::int64_t frame_id_;
};

class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

/// Every batch of an epoch was skipped during embedding training.
class TrainingDegenerateError : public Error {
 public:
  using Error::Error;
};

class InvalidVariant : public Error {
 public:
  using Error::Error;
};

class IllegalTransition : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace diverid
