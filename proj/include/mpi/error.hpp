#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mpi {

// Integer values are stable; they appear in serialized traces.
enum class error_class : std::int32_t {
  success = 0,
  invalid_rank = 1,
  invalid_tag = 2,
  invalid_argument = 3,
  truncation = 4,
  non_compliant_type = 5,
  use_after_free = 6,
  use_of_completed_request = 7,
  start_on_active = 8,
  inactive_request = 9,
  length_mismatch = 10,
  internal = 11,

  // Extensions for the simulated fabric. Not part of the standard set.
  consumed_future = 64,
  empty_set = 65,
  deadlock_suspected = 66,
};

constexpr bool is_extension(error_class c) noexcept {
  return static_cast<std::int32_t>(c) >= 64;
}

std::string_view to_string(error_class c) noexcept;
std::optional<error_class> parse_error_class(std::string_view name) noexcept;

/// An error class refined by a sub-code. A success code always has detail 0
/// and every failure code has a non-zero detail.
class error_code {
 public:
  error_code() = default;
  error_code(error_class cls, std::int32_t detail, std::string message = {});

  error_class cls() const noexcept { return class_; }
  std::int32_t detail() const noexcept { return detail_; }
  const std::string& message() const noexcept { return message_; }

  bool ok() const noexcept { return class_ == error_class::success; }
  explicit operator bool() const noexcept { return !ok(); }

  error_code with_message(std::string message) const;

  /// `class:detail:message`
  std::string render() const;
  static std::optional<error_code> parse(std::string_view text);

  // Equality ignores the message text.
  friend bool operator==(const error_code& a, const error_code& b) noexcept {
    return a.class_ == b.class_ && a.detail_ == b.detail_;
  }

 private:
  error_class class_ = error_class::success;
  std::int32_t detail_ = 0;
  std::string message_;
};

inline error_class class_of(const error_code& code) noexcept { return code.cls(); }

class exception : public std::runtime_error {
 public:
  explicit exception(error_code code);
  const error_code& code() const noexcept { return code_; }

 private:
  error_code code_;
};

/// Default codes. Sub-codes distinguish where a class of failure arose.
namespace error {
inline const error_code success{};
inline const error_code invalid_rank{error_class::invalid_rank, 1, "invalid destination rank"};
inline const error_code invalid_source{error_class::invalid_rank, 2, "invalid source rank"};
inline const error_code invalid_root{error_class::invalid_rank, 3, "invalid root rank"};
inline const error_code invalid_tag{error_class::invalid_tag, 1, "invalid tag"};
inline const error_code invalid_argument{error_class::invalid_argument, 1, "invalid argument"};
inline const error_code collective_mismatch{error_class::invalid_argument, 2,
                                            "collective argument mismatch"};
inline const error_code truncation{error_class::truncation, 1, "message truncated"};
inline const error_code non_compliant_type{error_class::non_compliant_type, 1,
                                           "type is not compliant"};
inline const error_code use_after_free{error_class::use_after_free, 1, "handle was freed"};
inline const error_code use_of_completed_request{error_class::use_of_completed_request, 1,
                                                 "request already completed"};
inline const error_code start_on_active{error_class::start_on_active, 1,
                                        "persistent request is already active"};
inline const error_code start_on_immediate{error_class::start_on_active, 2,
                                           "start called on an immediate request"};
inline const error_code inactive_request{error_class::inactive_request, 1, "request is inactive"};
inline const error_code length_mismatch{error_class::length_mismatch, 1, "buffer length mismatch"};
inline const error_code internal{error_class::internal, 1, "internal error"};
inline const error_code peer_failed{error_class::internal, 2, "a peer rank failed"};
inline const error_code consumed_future{error_class::consumed_future, 1, "future already consumed"};
inline const error_code empty_set{error_class::empty_set, 1, "empty set"};
inline const error_code deadlock_suspected{error_class::deadlock_suspected, 1,
                                           "all ranks blocked with no progress"};
}  // namespace error

enum class error_policy { raise, return_code };

/// Applies `policy` to `code`. Success passes through. Under `raise` a failure
/// throws `mpi::exception`; under `return_code` it is recorded as the calling
/// thread's last error and returned.
error_code check(const error_code& code, error_policy policy = error_policy::raise);

/// The most recent failure recorded on this thread under `return_code`.
const error_code& last_error() noexcept;
void clear_last_error() noexcept;

}  // namespace mpi
