#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vbones {

enum class ErrorKind {
  Validation,
  Configuration,
  BehindCamera,
  DegenerateBone,
  IncompatibleCheckpoint,
  Ingestion,
  TrainingDivergence,
  CheckFailure,
  Io,
  Internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so the CLI can report a
// stable machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by bone_directions_from_joints when a bone has zero length.
class DegenerateBoneError : public Error {
 public:
  DegenerateBoneError(int bone_index, const std::string& message)
      : Error(ErrorKind::DegenerateBone, message), bone_index_(bone_index) {}

  int bone_index() const noexcept { return bone_index_; }

 private:
  int bone_index_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace vbones
