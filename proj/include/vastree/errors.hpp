#pragma once

#include <stdexcept>
#include <string>

namespace vastree {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A world point or pixel fell outside the image domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed document; the message names the offending field.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameter value (temperature, patch size, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Two inputs disagree on shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Tree growth could not produce a usable tree; retry with another seed.
class GenerationFailed : public Error {
 public:
  using Error::Error;
};

/// Segmentation mask has no interior pixels.
class DegenerateMask : public Error {
 public:
  using Error::Error;
};

/// External scorer process misbehaved (handshake, protocol, I/O).
class ScorerError : public Error {
 public:
  using Error::Error;
};

}  // namespace vastree
