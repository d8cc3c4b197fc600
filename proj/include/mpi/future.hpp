#pragma once

// Futures over requests. Progress is driven inline: get() polls the chain,
// runs continuations on the calling thread as their predecessors complete,
// and otherwise blocks in the fabric on the union of pending tokens.

#include <cstddef>
#include <exception>
#include <memory>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

#include "mpi/request.hpp"

namespace mpi {

template <class R>
class basic_future;

using future = basic_future<status>;

struct when_any_result {
  std::size_t index = 0;
  status result;
  /// The input futures, in input order. The completed one is left invalid.
  std::vector<future> futures;
};

namespace detail {

class future_node {
 public:
  virtual ~future_node() = default;
  /// Non-blocking progress; true once the result is available. Returns false
  /// only while some token is pending.
  virtual bool poll() = 0;
  virtual void pending(std::vector<token*>& out) const = 0;
  virtual std::optional<endpoint> where() const = 0;
  virtual void block();
};

template <class R>
class future_state : public future_node {
 public:
  /// Valid once poll() returned true. May rethrow a stored exception.
  virtual R take() = 0;
};

template <class R>
R error_value(const error_code& code) {
  if constexpr (std::is_same_v<R, status>) {
    status s;
    s.error = code;
    return s;
  } else if constexpr (std::is_same_v<R, when_any_result>) {
    when_any_result r;
    r.result.error = code;
    return r;
  } else {
    return R{};
  }
}

template <class R>
const error_code* error_in(const R& value) {
  if constexpr (std::is_same_v<R, status>)
    return &value.error;
  else if constexpr (std::is_same_v<R, when_any_result>)
    return &value.result.error;
  else
    return nullptr;
}

template <class R>
class ready_state final : public future_state<R> {
 public:
  explicit ready_state(R value) : value_(std::move(value)) {}
  explicit ready_state(std::exception_ptr failure) : failure_(std::move(failure)) {}

  bool poll() override { return true; }
  void pending(std::vector<token*>&) const override {}
  std::optional<endpoint> where() const override { return std::nullopt; }
  R take() override {
    if (failure_) std::rethrow_exception(failure_);
    return std::move(*value_);
  }

 private:
  std::optional<R> value_;
  std::exception_ptr failure_;
};

class request_state final : public future_state<status> {
 public:
  explicit request_state(request r) : request_(std::move(r)) {}

  bool poll() override { return request_.progress(); }
  void pending(std::vector<token*>& out) const override { request_.pending(out); }
  std::optional<endpoint> where() const override { return request_.get_endpoint(); }
  status take() override { return request_.take(); }
  request& underlying() noexcept { return request_; }

 private:
  request request_;
};

std::unique_ptr<future_state<status>> adopt_request(request r, error_policy policy);

template <class X>
struct continuation_result {
  using type = X;
};
template <>
struct continuation_result<void> {
  using type = status;
};
template <>
struct continuation_result<request> {
  using type = status;
};
template <class T>
struct continuation_result<basic_future<T>> {
  using type = T;
};

template <class R, class P, class K>
class then_state;

}  // namespace detail

/// Single-consumer handle to an eventual result. then() and get() consume it.
template <class R>
class basic_future {
 public:
  using value_type = R;

  basic_future() = default;
  /// Takes ownership of an active or complete request. Inactive or consumed
  /// requests give a future that is ready with the corresponding error.
  explicit basic_future(request r)
    requires std::is_same_v<R, status>
      : policy_(r.policy()), state_(detail::adopt_request(std::move(r), policy_)) {}
  basic_future(std::unique_ptr<detail::future_state<R>> state, error_policy policy)
      : policy_(policy), state_(std::move(state)) {}

  basic_future(basic_future&&) noexcept = default;
  basic_future& operator=(basic_future&&) noexcept = default;
  basic_future(const basic_future&) = delete;
  basic_future& operator=(const basic_future&) = delete;

  static basic_future ready(R value, error_policy policy = error_policy::raise) {
    return basic_future(std::make_unique<detail::ready_state<R>>(std::move(value)), policy);
  }

  bool valid() const noexcept { return static_cast<bool>(state_); }
  error_policy policy() const noexcept { return policy_; }

  /// Drives progress without blocking. True once get() would not block.
  bool is_ready() { return state_ && state_->poll(); }

  /// Blocks until ready and returns the result. A second call reports
  /// consumed_future.
  R get() {
    if (!state_) return detail::error_value<R>(check(error::consumed_future, policy_));
    auto state = std::move(state_);
    state->block();
    R result = state->take();
    if (const error_code* e = detail::error_in(result)) check(*e, policy_);
    return result;
  }

  /// Runs k(ready future) once this future completes. k may return a
  /// request, a future, a value, or nothing; the returned future completes
  /// with the request's status, the future's result, the value, or a default
  /// status respectively.
  template <class K>
  auto then(K k) {
    using X = std::invoke_result_t<K, basic_future<R>>;
    using N = typename detail::continuation_result<X>::type;
    if (!state_) {
      const error_code e = check(error::consumed_future, policy_);
      return basic_future<N>::ready(detail::error_value<N>(e), policy_);
    }
    return basic_future<N>(
        std::make_unique<detail::then_state<N, R, K>>(std::move(state_), std::move(k), policy_),
        policy_);
  }

  /// Low-level access for composition. Leaves the future invalid.
  std::unique_ptr<detail::future_state<R>> release_state() && { return std::move(state_); }

 private:
  error_policy policy_ = error_policy::raise;
  std::unique_ptr<detail::future_state<R>> state_;
};

namespace detail {

template <class R, class P, class K>
class then_state final : public future_state<R> {
 public:
  then_state(std::unique_ptr<future_state<P>> predecessor, K k, error_policy policy)
      : predecessor_(std::move(predecessor)),
        continuation_(std::move(k)),
        policy_(policy),
        endpoint_(predecessor_->where()) {}

  bool poll() override {
    if (!next_) {
      if (!predecessor_->poll()) return false;
      run();
    }
    return next_->poll();
  }

  void pending(std::vector<token*>& out) const override {
    if (next_)
      next_->pending(out);
    else
      predecessor_->pending(out);
  }

  std::optional<endpoint> where() const override {
    if (next_) {
      if (auto ep = next_->where()) return ep;
    } else if (auto ep = predecessor_->where()) {
      return ep;
    }
    return endpoint_;
  }

  R take() override { return next_->take(); }

 private:
  void run() {
    using X = std::invoke_result_t<K, basic_future<P>>;
    try {
      basic_future<P> ready(std::move(predecessor_), policy_);
      if constexpr (std::is_void_v<X>) {
        (*continuation_)(std::move(ready));
        next_ = std::make_unique<ready_state<R>>(status{});
      } else if constexpr (std::is_same_v<X, request>) {
        next_ = adopt_request((*continuation_)(std::move(ready)), policy_);
      } else if constexpr (std::is_same_v<X, basic_future<R>>) {
        auto inner = std::move((*continuation_)(std::move(ready))).release_state();
        if (inner)
          next_ = std::move(inner);
        else
          next_ = std::make_unique<ready_state<R>>(
              error_value<R>(check(error::consumed_future, policy_)));
      } else {
        next_ = std::make_unique<ready_state<R>>((*continuation_)(std::move(ready)));
      }
    } catch (...) {
      next_ = std::make_unique<ready_state<R>>(std::current_exception());
    }
    continuation_.reset();
  }

  std::unique_ptr<future_state<P>> predecessor_;
  std::optional<K> continuation_;
  error_policy policy_;
  std::optional<endpoint> endpoint_;
  std::unique_ptr<future_state<R>> next_;
};

class when_all_state final : public future_state<std::vector<status>> {
 public:
  explicit when_all_state(std::vector<std::unique_ptr<future_state<status>>> children)
      : children_(std::move(children)) {}

  bool poll() override;
  void pending(std::vector<token*>& out) const override;
  std::optional<endpoint> where() const override;
  void block() override;
  std::vector<status> take() override;

 private:
  std::vector<std::unique_ptr<future_state<status>>> children_;
};

class when_any_state final : public future_state<when_any_result> {
 public:
  when_any_state(std::vector<std::unique_ptr<future_state<status>>> children, error_policy policy)
      : children_(std::move(children)), policy_(policy) {}

  bool poll() override;
  void pending(std::vector<token*>& out) const override;
  std::optional<endpoint> where() const override;
  when_any_result take() override;

 private:
  std::vector<std::unique_ptr<future_state<status>>> children_;
  error_policy policy_;
  std::optional<std::size_t> winner_;
};

}  // namespace detail

/// Ready when every input is. Statuses follow input order and carry their
/// own errors; the aggregate itself does not raise. Inputs that are bare
/// requests are completed together in a single wait-all.
basic_future<std::vector<status>> when_all(std::vector<future> futures);
basic_future<std::vector<status>> when_all(std::vector<request> requests);

/// Ready when any input is, yielding the lowest ready index. The remaining
/// futures stay live in the result. Empty input reports empty_set.
basic_future<when_any_result> when_any(std::vector<future> futures);
basic_future<when_any_result> when_any(std::vector<request> requests);

}  // namespace mpi
