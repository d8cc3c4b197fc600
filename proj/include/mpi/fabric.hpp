#pragma once

// In-process simulated transport. Each rank runs on its own thread; messages
// are matched on (source, tag, context) with wildcard source/tag, in arrival
// order, so messages between a fixed pair never overtake each other. Sends
// are eager: the fabric takes ownership of the payload and the send completes
// immediately.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <type_traits>
#include <unordered_map>
#include <variant>
#include <vector>

#include "mpi/error.hpp"

namespace mpi {

inline constexpr int any_source = -1;
inline constexpr int any_tag = -1;

struct envelope {
  int source = any_source;
  int dest = 0;
  int tag = any_tag;
  int context = 0;
  std::size_t length = 0;
  friend bool operator==(const envelope&, const envelope&) = default;
};

constexpr bool matches(const envelope& pattern, const envelope& message) noexcept {
  return pattern.context == message.context &&
         (pattern.source == any_source || pattern.source == message.source) &&
         (pattern.tag == any_tag || pattern.tag == message.tag);
}

enum class trace_event { send_posted, recv_posted, matched, truncated, probed };

struct fabric_config {
  int world_size = 1;
  std::uint64_t seed = 0;
  std::optional<std::chrono::milliseconds> watchdog_timeout;
  error_policy policy = error_policy::raise;
  // Seed-driven random yields and short sleeps at every post, to shake out
  // interleavings in tests.
  bool jitter = false;
  std::function<void(trace_event, const envelope&)> trace;
};

/// Completion handle of a posted send or receive. Completes exactly once.
class token {
 public:
  enum class state : std::uint8_t { pending, complete, failed };

  state current() const noexcept { return state_.load(std::memory_order_acquire); }
  bool done() const noexcept { return current() != state::pending; }
  bool failed() const noexcept { return current() == state::failed; }

  int owner() const noexcept { return owner_; }
  /// Envelope of the matched message. Valid once done.
  const envelope& matched() const noexcept { return matched_; }
  const error_code& error() const noexcept { return error_; }
  /// Received bytes. Valid once complete; only the owner may touch them.
  std::vector<std::byte>& payload() noexcept { return payload_; }

 private:
  friend class fabric;
  token(int owner, envelope pattern, std::size_t capacity)
      : owner_(owner), pattern_(pattern), capacity_(capacity) {}

  int owner_;
  envelope pattern_;
  std::size_t capacity_;
  envelope matched_{};
  error_code error_;
  std::vector<std::byte> payload_;
  std::atomic<state> state_{state::pending};
};

using token_ptr = std::shared_ptr<token>;

struct fabric_stats {
  std::uint64_t sent = 0;
  std::uint64_t consumed = 0;
  std::uint64_t unexpected_pending = 0;
  std::uint64_t receives_pending = 0;
};

class fabric;

/// A rank's view of the fabric.
class endpoint {
 public:
  endpoint(fabric& f, int rank) : fabric_(&f), rank_(rank) {}
  int rank() const noexcept { return rank_; }
  fabric& get_fabric() const noexcept { return *fabric_; }

 private:
  fabric* fabric_;
  int rank_;
};

class fabric {
 public:
  explicit fabric(fabric_config config);
  fabric(const fabric&) = delete;
  fabric& operator=(const fabric&) = delete;
  ~fabric();

  int world_size() const noexcept { return config_.world_size; }
  error_policy policy() const noexcept { return config_.policy; }
  const fabric_config& config() const noexcept { return config_; }

  token_ptr post_send(const envelope& env, std::vector<std::byte> payload);
  /// `pattern.dest` is the receiving rank; source and tag may be wildcards.
  token_ptr post_recv(const envelope& pattern, std::size_t capacity);
  /// Envelope of the earliest pending message matching `pattern`, without
  /// consuming it. The non-blocking form returns nullopt when none is pending.
  std::optional<envelope> probe(const envelope& pattern, bool blocking);

  /// Blocks `rank` until one of `tokens` is done. Throws
  /// deadlock_suspected or peer_failed when the world cannot make progress.
  void wait_any(int rank, std::span<token* const> tokens);
  void wait_all(int rank, std::span<token* const> tokens);

  // Context registry. Ids are never reused.
  int allocate_context();
  void acquire_context(int context);
  void release_context(int context);
  std::int64_t live_handles(int context) const;
  std::int64_t live_handles() const;
  std::uint64_t acquisitions() const;
  std::uint64_t releases() const;

  fabric_stats stats() const;

  /// Runs `body` on world_size threads and joins them. `body` must not throw.
  void run_ranks(const std::function<void(endpoint)>& body);
  /// Marks a rank as failed; blocked peers are woken with peer_failed.
  void report_failure(int rank);

 private:
  struct message {
    envelope env;
    std::vector<std::byte> payload;
  };
  struct mailbox {
    std::deque<message> unexpected;
    std::deque<token_ptr> posted;
  };

  mailbox& mailbox_for(int dest, int context);
  void deliver(token& t, message&& m);
  void trace(trace_event event, const envelope& env) const;
  void maybe_jitter(int rank);
  void throw_if_stuck() const;
  void watchdog(std::stop_token stop);
  void wait_until(int rank, std::unique_lock<std::mutex>& lock,
                  const std::function<bool()>& ready);

  fabric_config config_;
  mutable std::mutex mutex_;
  std::vector<std::condition_variable> wakeups_;
  std::unordered_map<std::uint64_t, mailbox> mailboxes_;
  std::vector<std::mt19937_64> jitter_rng_;

  fabric_stats stats_;
  std::uint64_t epoch_ = 0;
  int running_ = 0;
  int blocked_ = 0;
  bool deadlock_ = false;
  bool aborted_ = false;

  std::atomic<int> next_context_{1};
  std::unordered_map<int, std::int64_t> live_contexts_;
  std::uint64_t acquisitions_ = 0;
  std::uint64_t releases_ = 0;
};

template <class R>
struct rank_result {
  int rank = 0;
  std::optional<R> value;
  error_code error;
  std::exception_ptr exception;
  bool ok() const noexcept { return error.ok(); }
};

/// Runs `rank_main(endpoint)` on every rank of `f`. Failures are attributed to
/// the rank that raised them; ranks woken because of another rank's failure
/// report peer_failed.
template <class F>
auto spawn_world(fabric& f, F&& rank_main) {
  using raw_result = std::invoke_result_t<F&, endpoint>;
  using result_type = std::conditional_t<std::is_void_v<raw_result>, std::monostate, raw_result>;
  std::vector<rank_result<result_type>> results(static_cast<std::size_t>(f.world_size()));
  f.run_ranks([&](endpoint ep) {
    auto& slot = results[static_cast<std::size_t>(ep.rank())];
    slot.rank = ep.rank();
    try {
      if constexpr (std::is_void_v<raw_result>) {
        rank_main(ep);
        slot.value = std::monostate{};
      } else {
        slot.value = rank_main(ep);
      }
    } catch (const exception& e) {
      slot.error = e.code();
      slot.exception = std::current_exception();
      f.report_failure(ep.rank());
    } catch (const std::exception& e) {
      slot.error = error::internal.with_message(e.what());
      slot.exception = std::current_exception();
      f.report_failure(ep.rank());
    } catch (...) {
      slot.error = error::internal.with_message("unknown exception");
      slot.exception = std::current_exception();
      f.report_failure(ep.rank());
    }
  });
  return results;
}

template <class F>
auto spawn_world(fabric_config config, F&& rank_main) {
  fabric f(std::move(config));
  return spawn_world(f, std::forward<F>(rank_main));
}

/// Values of a successful world run; otherwise rethrows the root cause,
/// preferring an original failure over peer_failed.
template <class R>
std::vector<R> values_or_throw(std::vector<rank_result<R>> results) {
  const rank_result<R>* cause = nullptr;
  for (const auto& r : results) {
    if (r.ok()) continue;
    if (cause == nullptr || (cause->error == error::peer_failed && !(r.error == error::peer_failed)))
      cause = &r;
  }
  if (cause != nullptr) std::rethrow_exception(cause->exception);
  std::vector<R> values;
  values.reserve(results.size());
  for (auto& r : results) values.push_back(std::move(*r.value));
  return values;
}

template <class F>
auto run_world(fabric& f, F&& rank_main) {
  return values_or_throw(spawn_world(f, std::forward<F>(rank_main)));
}

template <class F>
auto run_world(fabric_config config, F&& rank_main) {
  fabric f(std::move(config));
  return run_world(f, std::forward<F>(rank_main));
}

}  // namespace mpi
