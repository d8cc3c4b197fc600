#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mpi/detail/operation.hpp"
#include "mpi/fabric.hpp"
#include "mpi/status.hpp"

namespace mpi {
namespace detail {

/// One activation of a pending operation.
class request_impl {
 public:
  virtual ~request_impl() = default;
  /// Non-blocking progress. True once the operation finished.
  virtual bool progress() = 0;
  virtual void pending(std::vector<token*>& out) const = 0;
  /// Valid once progress() returned true.
  virtual status result() = 0;
};

class completed_request final : public request_impl {
 public:
  explicit completed_request(status s) : status_(std::move(s)) {}
  bool progress() override { return true; }
  void pending(std::vector<token*>&) const override {}
  status result() override { return status_; }

 private:
  status status_;
};

class operation_request final : public request_impl {
 public:
  explicit operation_request(operation op) : op_(std::move(op)) {}
  bool progress() override { return op_.progress(); }
  void pending(std::vector<token*>& out) const override { op_.pending(out); }
  status result() override { return op_.result(); }

 private:
  operation op_;
};

using request_factory = std::function<std::unique_ptr<request_impl>()>;

}  // namespace detail

/// Handle to a pending operation. Immediate requests are single-use: once
/// their status has been returned by wait() or test(), further calls report
/// use_of_completed_request. Persistent requests cycle between inactive and
/// active through start().
class request {
 public:
  enum class kind { immediate, persistent };
  enum class state { inactive, active, complete, consumed };

  request() = default;
  request(endpoint ep, std::unique_ptr<detail::request_impl> impl);
  static request make_persistent(endpoint ep, detail::request_factory factory);

  request(request&&) noexcept = default;
  request& operator=(request&&) noexcept = default;
  request(const request&) = delete;
  request& operator=(const request&) = delete;
  ~request() = default;

  kind get_kind() const noexcept { return kind_; }
  state get_state() const noexcept { return state_; }
  bool is_persistent() const noexcept { return kind_ == kind::persistent; }
  bool is_null() const noexcept { return !ep_; }

  /// Activates an inactive persistent request.
  error_code start();

  /// Blocks until complete and returns the status. Errors follow the
  /// communicator's policy.
  status wait();
  /// Status if complete, nullopt otherwise.
  std::optional<status> test();

  /// Non-blocking progress without consuming the result.
  bool progress();
  void pending(std::vector<token*>& out) const;
  /// Consumes the result without applying the error policy.
  status take();
  /// Blocks until the underlying operation finished.
  void block();
  std::optional<endpoint> get_endpoint() const noexcept { return ep_; }
  error_policy policy() const noexcept;

 private:
  status misuse(const error_code& code);

  std::optional<endpoint> ep_;
  kind kind_ = kind::immediate;
  state state_ = state::inactive;
  std::unique_ptr<detail::request_impl> impl_;
  detail::request_factory factory_;
};

/// Completes every request in one call. Statuses keep their per-request errors;
/// under the raise policy the first error is thrown after all completed.
std::vector<status> wait_all(std::span<request> requests);
/// Waits for the first request to complete: (index, status). Inactive or
/// consumed requests are skipped; empty_set when none is active.
std::pair<std::size_t, status> wait_any(std::span<request> requests);

namespace detail {
/// Drives requests until all finished, with a single fabric wait per round.
void block_all(std::span<request* const> requests);
}  // namespace detail

}  // namespace mpi
