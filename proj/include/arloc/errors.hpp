#pragma once

#include <stdexcept>
#include <string>

namespace arloc {

// Precondition failures on caller-supplied values.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation called on an object that cannot support it (e.g. an empty map).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A fingerprint that aligns to the all-zero vector.
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientMatches : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every keypoint pair used by a distance ratio is coincident in the query.
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoCandidate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatch : public std::runtime_error {
 public:
  VersionMismatch(int found, int supported)
      : std::runtime_error("unsupported format_version " + std::to_string(found) +
                           " (this build supports " + std::to_string(supported) + ")"),
        found_(found),
        supported_(supported) {}

  int found() const noexcept { return found_; }
  int supported() const noexcept { return supported_; }

 private:
  int found_;
  int supported_;
};

class SchemaViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace arloc
