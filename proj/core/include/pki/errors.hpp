#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pki {

// Bad caller input: dimensions, ranges, malformed configuration.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent configuration file / option.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// The object is in a state that forbids the requested operation.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An optimizer tried to write into a frozen parameter tensor.
class FrozenParameter : public InvalidState {
 public:
  using InvalidState::InvalidState;
};

// The requested operation is not defined for the ensemble mode.
class UnsupportedMode : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// A vector with (near-)zero norm reached l2 normalization. During training
// this means the projector output collapsed.
class DegenerateVector : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feature files, checkpoints, and manifests.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

enum class StreamViolationKind {
  kSessionCount,
  kDimensionMismatch,
  kOverlap,
  kWayCount,
  kShotCount,
  kTestLabel,
  kEmpty,
};

// First broken invariant found by validate_stream.
class StreamViolation : public std::runtime_error {
 public:
  StreamViolation(StreamViolationKind kind, std::size_t session, std::int64_t class_id,
                  const std::string& what)
      : std::runtime_error(what), kind_(kind), session_(session), class_id_(class_id) {}

  StreamViolationKind kind() const noexcept { return kind_; }
  std::size_t session() const noexcept { return session_; }
  // -1 when the violation is not about a particular class.
  std::int64_t class_id() const noexcept { return class_id_; }

 private:
  StreamViolationKind kind_;
  std::size_t session_;
  std::int64_t class_id_;
};

}  // namespace pki
