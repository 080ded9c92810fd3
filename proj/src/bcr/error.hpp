#pragma once

#include <stdexcept>
#include <string>

namespace bcr {

// Error taxonomy shared by the whole library. The C boundary maps kinds to
// exit-code classes: bad inputs/configuration -> usage, internal failures
// during computation -> runtime.
enum class ErrKind {
  Shape,       // operand shapes incompatible
  Numeric,     // non-finite value produced by an operation
  Domain,      // argument outside the mathematical domain
  Config,      // invalid or unknown configuration
  Fit,         // rank-deficient or otherwise unsolvable least squares
  Parse,       // malformed file content
  Io,          // file not found / unreadable / unwritable
  Checkpoint,  // checkpoint version or checksum mismatch
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrKind kind() const { return kind_; }

 private:
  ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& msg) { throw Error(kind, msg); }

// True for error kinds caused by what the caller handed in (maps to exit 2).
inline bool is_usage_error(ErrKind k) {
  switch (k) {
    case ErrKind::Domain:
    case ErrKind::Config:
    case ErrKind::Parse:
    case ErrKind::Io:
    case ErrKind::Checkpoint:
      return true;
    default:
      return false;
  }
}

}  // namespace bcr
