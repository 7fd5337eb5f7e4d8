#pragma once

#include <stdexcept>
#include <string>

namespace planefilter {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateSample : public Error {
 public:
  explicit DegenerateSample(const std::string& what = "degenerate sample")
      : Error(what) {}
};

class SingularHomography : public Error {
 public:
  explicit SingularHomography(const std::string& what = "singular homography")
      : Error(what) {}
};

class NoModel : public Error {
 public:
  explicit NoModel(const std::string& what = "no valid model found")
      : Error(what) {}
};

class NoCompatiblePlane : public Error {
 public:
  explicit NoCompatiblePlane(const std::string& what = "no compatible plane")
      : Error(what) {}
};

class OutOfBounds : public Error {
 public:
  explicit OutOfBounds(const std::string& what = "patch out of bounds")
      : Error(what) {}
};

class InsufficientMatches : public Error {
 public:
  explicit InsufficientMatches(const std::string& what = "insufficient matches")
      : Error(what) {}
};

class DegenerateConfiguration : public Error {
 public:
  explicit DegenerateConfiguration(
      const std::string& what = "degenerate configuration")
      : Error(what) {}
};

class RejectionLimit : public Error {
 public:
  explicit RejectionLimit(const std::string& what = "rejection limit reached")
      : Error(what) {}
};

class EmptyOverlap : public Error {
 public:
  explicit EmptyOverlap(const std::string& what = "empty overlap")
      : Error(what) {}
};

/// Malformed input file or document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Image file could not be decoded.
class ImageDecodeError : public Error {
 public:
  using Error::Error;
};

}  // namespace planefilter
