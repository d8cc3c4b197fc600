#include "mpi/fabric.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>

namespace mpi {
namespace {

std::uint64_t mailbox_key(int dest, int context) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(dest)) << 32) |
         static_cast<std::uint32_t>(context);
}

}  // namespace

fabric::fabric(fabric_config config)
    : config_(std::move(config)), wakeups_(static_cast<std::size_t>(std::max(config_.world_size, 1))) {
  if (config_.world_size < 1)
    throw exception(error::invalid_argument.with_message("world_size must be at least 1"));
  jitter_rng_.reserve(static_cast<std::size_t>(config_.world_size));
  for (int r = 0; r < config_.world_size; ++r) {
    std::seed_seq seq{config_.seed, static_cast<std::uint64_t>(r)};
    jitter_rng_.emplace_back(seq);
  }
}

fabric::~fabric() = default;

fabric::mailbox& fabric::mailbox_for(int dest, int context) {
  return mailboxes_[mailbox_key(dest, context)];
}

void fabric::trace(trace_event event, const envelope& env) const {
  if (config_.trace) config_.trace(event, env);
}

void fabric::maybe_jitter(int rank) {
  if (!config_.jitter || rank < 0 || rank >= config_.world_size) return;
  // Only the rank's own thread draws from its generator.
  const auto draw = jitter_rng_[static_cast<std::size_t>(rank)]() % 16;
  if (draw < 6) return;
  if (draw < 14) {
    std::this_thread::yield();
    return;
  }
  std::this_thread::sleep_for(std::chrono::microseconds(draw - 13));
}

void fabric::deliver(token& t, message&& m) {
  t.matched_ = m.env;
  ++stats_.consumed;
  ++epoch_;
  if (m.env.length > t.capacity_) {
    t.error_ = error::truncation.with_message(
        "message of " + std::to_string(m.env.length) + " bytes exceeds receive capacity of " +
        std::to_string(t.capacity_));
    trace(trace_event::truncated, m.env);
    t.state_.store(token::state::failed, std::memory_order_release);
  } else {
    t.payload_ = std::move(m.payload);
    trace(trace_event::matched, m.env);
    t.state_.store(token::state::complete, std::memory_order_release);
  }
  wakeups_[static_cast<std::size_t>(t.owner_)].notify_all();
}

token_ptr fabric::post_send(const envelope& env, std::vector<std::byte> payload) {
  maybe_jitter(env.source);
  auto t = token_ptr(new token(std::max(env.source, 0), env, 0));
  t->matched_ = env;
  auto fail = [&](const error_code& code) {
    t->error_ = code;
    t->state_.store(token::state::failed, std::memory_order_release);
    return t;
  };
  if (env.dest < 0 || env.dest >= config_.world_size) return fail(error::invalid_rank);
  if (env.source < 0 || env.source >= config_.world_size) return fail(error::invalid_source);
  if (env.tag < 0) return fail(error::invalid_tag);
  if (env.length != payload.size()) return fail(error::length_mismatch);

  std::lock_guard lock(mutex_);
  ++stats_.sent;
  ++epoch_;
  trace(trace_event::send_posted, env);
  auto& box = mailbox_for(env.dest, env.context);
  const auto it = std::find_if(box.posted.begin(), box.posted.end(),
                               [&](const token_ptr& r) { return matches(r->pattern_, env); });
  if (it != box.posted.end()) {
    token_ptr receiver = std::move(*it);
    box.posted.erase(it);
    deliver(*receiver, message{env, std::move(payload)});
  } else {
    box.unexpected.push_back(message{env, std::move(payload)});
    wakeups_[static_cast<std::size_t>(env.dest)].notify_all();
  }
  t->state_.store(token::state::complete, std::memory_order_release);
  return t;
}

token_ptr fabric::post_recv(const envelope& pattern, std::size_t capacity) {
  maybe_jitter(pattern.dest);
  auto t = token_ptr(new token(std::max(pattern.dest, 0), pattern, capacity));
  auto fail = [&](const error_code& code) {
    t->error_ = code;
    t->matched_ = pattern;
    t->state_.store(token::state::failed, std::memory_order_release);
    return t;
  };
  if (pattern.dest < 0 || pattern.dest >= config_.world_size) return fail(error::invalid_rank);
  if (pattern.source != any_source && (pattern.source < 0 || pattern.source >= config_.world_size))
    return fail(error::invalid_source);
  if (pattern.tag < 0 && pattern.tag != any_tag) return fail(error::invalid_tag);

  std::lock_guard lock(mutex_);
  ++epoch_;
  trace(trace_event::recv_posted, pattern);
  auto& box = mailbox_for(pattern.dest, pattern.context);
  const auto it = std::find_if(box.unexpected.begin(), box.unexpected.end(),
                               [&](const message& m) { return matches(pattern, m.env); });
  if (it != box.unexpected.end()) {
    message m = std::move(*it);
    box.unexpected.erase(it);
    deliver(*t, std::move(m));
  } else {
    box.posted.push_back(t);
  }
  return t;
}

std::optional<envelope> fabric::probe(const envelope& pattern, bool blocking) {
  std::unique_lock lock(mutex_);
  auto& box = mailbox_for(pattern.dest, pattern.context);
  auto find = [&]() -> std::optional<envelope> {
    const auto it = std::find_if(box.unexpected.begin(), box.unexpected.end(),
                                 [&](const message& m) { return matches(pattern, m.env); });
    if (it == box.unexpected.end()) return std::nullopt;
    return it->env;
  };
  auto found = find();
  if (!found && blocking) {
    wait_until(pattern.dest, lock, [&] { return (found = find()).has_value(); });
  }
  if (found) trace(trace_event::probed, *found);
  return found;
}

void fabric::throw_if_stuck() const {
  if (deadlock_) throw exception(error::deadlock_suspected);
  if (aborted_) throw exception(error::peer_failed);
}

void fabric::wait_until(int rank, std::unique_lock<std::mutex>& lock,
                        const std::function<bool()>& ready) {
  if (ready()) return;
  struct blocked_guard {
    int& count;
    explicit blocked_guard(int& c) : count(c) { ++count; }
    ~blocked_guard() { --count; }
  } guard(blocked_);
  auto& cv = wakeups_[static_cast<std::size_t>(rank)];
  while (!ready()) {
    throw_if_stuck();
    cv.wait(lock);
  }
}

namespace {

// Yields the processor a bounded number of times before blocking, so that a
// peer about to complete the wait can run without a futex round trip.
template <class Ready>
bool spin_until(const Ready& ready) {
  for (int i = 0; i < 16; ++i) {
    if (ready()) return true;
    std::this_thread::yield();
  }
  return ready();
}

}  // namespace

void fabric::wait_any(int rank, std::span<token* const> tokens) {
  if (tokens.empty()) return;
  auto any_done = [&] {
    return std::any_of(tokens.begin(), tokens.end(), [](const token* t) { return t->done(); });
  };
  if (spin_until(any_done)) return;
  std::unique_lock lock(mutex_);
  wait_until(rank, lock, any_done);
}

void fabric::wait_all(int rank, std::span<token* const> tokens) {
  auto all_done = [&] {
    return std::all_of(tokens.begin(), tokens.end(), [](const token* t) { return t->done(); });
  };
  if (spin_until(all_done)) return;
  std::unique_lock lock(mutex_);
  wait_until(rank, lock, all_done);
}

int fabric::allocate_context() { return next_context_.fetch_add(1); }

void fabric::acquire_context(int context) {
  std::lock_guard lock(mutex_);
  ++live_contexts_[context];
  ++acquisitions_;
}

void fabric::release_context(int context) {
  std::lock_guard lock(mutex_);
  auto it = live_contexts_.find(context);
  if (it == live_contexts_.end() || it->second == 0)
    throw exception(error::internal.with_message("context released more often than acquired"));
  if (--it->second == 0) live_contexts_.erase(it);
  ++releases_;
}

std::int64_t fabric::live_handles(int context) const {
  std::lock_guard lock(mutex_);
  const auto it = live_contexts_.find(context);
  return it == live_contexts_.end() ? 0 : it->second;
}

std::int64_t fabric::live_handles() const {
  std::lock_guard lock(mutex_);
  std::int64_t total = 0;
  for (const auto& [context, count] : live_contexts_) total += count;
  return total;
}

std::uint64_t fabric::acquisitions() const {
  std::lock_guard lock(mutex_);
  return acquisitions_;
}

std::uint64_t fabric::releases() const {
  std::lock_guard lock(mutex_);
  return releases_;
}

fabric_stats fabric::stats() const {
  std::lock_guard lock(mutex_);
  fabric_stats s = stats_;
  s.unexpected_pending = 0;
  s.receives_pending = 0;
  for (const auto& [key, box] : mailboxes_) {
    s.unexpected_pending += box.unexpected.size();
    s.receives_pending += box.posted.size();
  }
  return s;
}

void fabric::report_failure(int) {
  std::lock_guard lock(mutex_);
  aborted_ = true;
  for (auto& cv : wakeups_) cv.notify_all();
}

void fabric::watchdog(std::stop_token stop) {
  const auto timeout = *config_.watchdog_timeout;
  const auto poll = std::clamp<std::chrono::milliseconds>(timeout / 10, std::chrono::milliseconds(1),
                                                          std::chrono::milliseconds(20));
  std::uint64_t last_epoch = 0;
  auto since = std::chrono::steady_clock::now();
  std::mutex idle;
  std::condition_variable_any tick;
  while (!stop.stop_requested()) {
    {
      std::unique_lock idle_lock(idle);
      tick.wait_for(idle_lock, stop, poll, [] { return false; });
    }
    if (stop.stop_requested()) return;
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    if (running_ == 0) return;
    if (blocked_ < running_ || epoch_ != last_epoch) {
      last_epoch = epoch_;
      since = now;
      continue;
    }
    if (now - since >= timeout) {
      deadlock_ = true;
      for (auto& cv : wakeups_) cv.notify_all();
      return;
    }
  }
}

void fabric::run_ranks(const std::function<void(endpoint)>& body) {
  {
    std::lock_guard lock(mutex_);
    running_ = config_.world_size;
    blocked_ = 0;
    deadlock_ = false;
    aborted_ = false;
  }
  std::jthread watchdog_thread;
  if (config_.watchdog_timeout)
    watchdog_thread = std::jthread([this](std::stop_token stop) { watchdog(stop); });
  {
    std::vector<std::jthread> ranks;
    ranks.reserve(static_cast<std::size_t>(config_.world_size));
    for (int r = 0; r < config_.world_size; ++r) {
      ranks.emplace_back([this, &body, r] {
        body(endpoint(*this, r));
        std::lock_guard lock(mutex_);
        --running_;
        for (auto& cv : wakeups_) cv.notify_all();
      });
    }
  }
  if (watchdog_thread.joinable()) {
    watchdog_thread.request_stop();
    watchdog_thread.join();
  }
}

}  // namespace mpi
