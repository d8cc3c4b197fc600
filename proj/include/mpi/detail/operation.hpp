#pragma once

// Coroutine type for multi-round operations (collectives). The body runs
// eagerly up to its first receive; afterwards it only advances when the
// owning rank drives it through progress(). Failed receive tokens surface as
// mpi::exception inside the body.

#include <coroutine>
#include <cstddef>
#include <exception>
#include <span>
#include <utility>
#include <vector>

#include "mpi/fabric.hpp"
#include "mpi/status.hpp"

namespace mpi::detail {

/// Per-thread cache of released coroutine frames, reused by size.
class frame_cache {
 public:
  static void* allocate(std::size_t bytes);
  static void release(void* p, std::size_t bytes) noexcept;
};

class operation {
 public:
  struct promise_type {
    static void* operator new(std::size_t bytes) { return frame_cache::allocate(bytes); }
    static void operator delete(void* p, std::size_t bytes) noexcept {
      frame_cache::release(p, bytes);
    }

    // Points into the suspended token_awaiter, which lives in the frame.
    std::span<const token_ptr> awaiting;
    operation* child = nullptr;
    status result;
    std::exception_ptr failure;

    operation get_return_object() {
      return operation{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_never initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    void return_value(status s) { result = std::move(s); }
    void unhandled_exception() { failure = std::current_exception(); }
  };
  using handle_type = std::coroutine_handle<promise_type>;

  operation() = default;
  operation(operation&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
  operation& operator=(operation&& other) noexcept {
    if (this != &other) {
      reset();
      handle_ = std::exchange(other.handle_, {});
    }
    return *this;
  }
  operation(const operation&) = delete;
  operation& operator=(const operation&) = delete;
  ~operation() { reset(); }

  bool valid() const noexcept { return static_cast<bool>(handle_); }

  /// Resumes the body while its awaited tokens are done. True once finished.
  bool progress() {
    auto& promise = handle_.promise();
    while (!handle_.done()) {
      if (promise.child != nullptr) {
        if (!promise.child->progress()) return false;
        promise.child = nullptr;
      }
      for (const auto& t : promise.awaiting)
        if (!t->done()) return false;
      promise.awaiting = {};
      handle_.resume();
    }
    return true;
  }

  void pending(std::vector<token*>& out) const {
    if (handle_.done()) return;
    if (handle_.promise().child != nullptr) {
      handle_.promise().child->pending(out);
      return;
    }
    const std::size_t before = out.size();
    const auto& awaiting = handle_.promise().awaiting;
    for (const auto& t : awaiting)
      if (!t->done()) out.push_back(t.get());
    // All awaited tokens finished after the last progress check.
    if (out.size() == before && !awaiting.empty()) out.push_back(awaiting.front().get());
  }

  /// Final status. mpi::exception failures become the status error; anything
  /// else is rethrown.
  status result() const {
    auto& promise = handle_.promise();
    if (promise.failure) {
      try {
        std::rethrow_exception(promise.failure);
      } catch (const exception& e) {
        status s;
        s.error = e.code();
        return s;
      }
    }
    return promise.result;
  }

 private:
  explicit operation(handle_type h) : handle_(h) {}
  void reset() {
    if (handle_) handle_.destroy();
    handle_ = {};
  }
  handle_type handle_;
};

/// `co_await completion_of(tokens)` suspends until every token is done and
/// throws the first failure.
struct token_awaiter {
  token_ptr single;
  std::vector<token_ptr> many;

  std::span<const token_ptr> tokens() const noexcept {
    if (single) return {&single, 1};
    return many;
  }
  bool await_ready() const noexcept {
    for (const auto& t : tokens())
      if (!t->done()) return false;
    return true;
  }
  void await_suspend(std::coroutine_handle<operation::promise_type> h) {
    h.promise().awaiting = tokens();
  }
  void await_resume() const {
    for (const auto& t : tokens())
      if (t->failed()) throw exception(t->error());
  }
};

/// `co_await std::move(op)` runs a nested operation to completion and throws
/// its error, if any.
struct operation_awaiter {
  operation op;
  bool await_ready() { return op.progress(); }
  void await_suspend(std::coroutine_handle<operation::promise_type> h) {
    h.promise().child = &op;
  }
  status await_resume() const {
    status s = op.result();
    if (!s.error.ok()) throw exception(s.error);
    return s;
  }
};

inline operation_awaiter operator co_await(operation&& op) {
  return operation_awaiter{std::move(op)};
}

inline token_awaiter completion_of(token_ptr t) { return token_awaiter{std::move(t), {}}; }
inline token_awaiter completion_of(std::vector<token_ptr> tokens) {
  return token_awaiter{nullptr, std::move(tokens)};
}

}  // namespace mpi::detail
