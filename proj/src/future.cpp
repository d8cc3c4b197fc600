#include "mpi/future.hpp"

namespace mpi {
namespace detail {

void future_node::block() {
  std::vector<token*> tokens;
  while (!poll()) {
    tokens.clear();
    pending(tokens);
    auto ep = where();
    if (tokens.empty() || !ep)
      throw exception(error::internal.with_message("future is stalled with nothing pending"));
    ep->get_fabric().wait_any(ep->rank(), tokens);
  }
}

std::unique_ptr<future_state<status>> adopt_request(request r, error_policy policy) {
  error_code e;
  if (r.is_null() || r.get_state() == request::state::inactive)
    e = error::inactive_request;
  else if (r.get_state() == request::state::consumed)
    e = error::use_of_completed_request;
  if (!e.ok()) return std::make_unique<ready_state<status>>(error_value<status>(check(e, policy)));
  return std::make_unique<request_state>(std::move(r));
}

namespace {

status take_status(future_state<status>& child) {
  try {
    return child.take();
  } catch (const exception& e) {
    return error_value<status>(e.code());
  }
}

}  // namespace

bool when_all_state::poll() {
  bool all = true;
  for (auto& c : children_) all = c->poll() && all;
  return all;
}

void when_all_state::pending(std::vector<token*>& out) const {
  for (const auto& c : children_) c->pending(out);
}

std::optional<endpoint> when_all_state::where() const {
  for (const auto& c : children_)
    if (auto ep = c->where()) return ep;
  return std::nullopt;
}

void when_all_state::block() {
  std::vector<request*> requests;
  for (auto& c : children_) {
    auto* r = dynamic_cast<request_state*>(c.get());
    if (r == nullptr) return future_node::block();
    requests.push_back(&r->underlying());
  }
  block_all(requests);
}

std::vector<status> when_all_state::take() {
  std::vector<status> out;
  out.reserve(children_.size());
  for (auto& c : children_) out.push_back(take_status(*c));
  return out;
}

bool when_any_state::poll() {
  if (winner_) return true;
  for (std::size_t i = 0; i < children_.size(); ++i) {
    if (children_[i]->poll()) {
      winner_ = i;
      return true;
    }
  }
  return false;
}

void when_any_state::pending(std::vector<token*>& out) const {
  for (const auto& c : children_) c->pending(out);
}

std::optional<endpoint> when_any_state::where() const {
  for (const auto& c : children_)
    if (auto ep = c->where()) return ep;
  return std::nullopt;
}

when_any_result when_any_state::take() {
  when_any_result r;
  r.index = *winner_;
  r.result = take_status(*children_[r.index]);
  r.futures.reserve(children_.size());
  for (std::size_t i = 0; i < children_.size(); ++i) {
    if (i == r.index)
      r.futures.emplace_back();
    else
      r.futures.emplace_back(std::move(children_[i]), policy_);
  }
  return r;
}

std::vector<std::unique_ptr<future_state<status>>> states_of(std::vector<future>& futures,
                                                             error_policy& policy) {
  std::vector<std::unique_ptr<future_state<status>>> states;
  states.reserve(futures.size());
  for (auto& f : futures) {
    policy = f.policy();
    auto s = std::move(f).release_state();
    if (!s)
      s = std::make_unique<ready_state<status>>(
          error_value<status>(check(error::consumed_future, f.policy())));
    states.push_back(std::move(s));
  }
  return states;
}

std::vector<future> futures_of(std::vector<request> requests) {
  std::vector<future> out;
  out.reserve(requests.size());
  for (auto& r : requests) out.emplace_back(std::move(r));
  return out;
}

}  // namespace detail

basic_future<std::vector<status>> when_all(std::vector<future> futures) {
  error_policy policy = error_policy::raise;
  auto states = detail::states_of(futures, policy);
  return basic_future<std::vector<status>>(
      std::make_unique<detail::when_all_state>(std::move(states)), policy);
}

basic_future<std::vector<status>> when_all(std::vector<request> requests) {
  return when_all(detail::futures_of(std::move(requests)));
}

basic_future<when_any_result> when_any(std::vector<future> futures) {
  error_policy policy = error_policy::raise;
  if (futures.empty()) {
    return basic_future<when_any_result>::ready(
        detail::error_value<when_any_result>(error::empty_set), policy);
  }
  auto states = detail::states_of(futures, policy);
  return basic_future<when_any_result>(
      std::make_unique<detail::when_any_state>(std::move(states), policy), policy);
}

basic_future<when_any_result> when_any(std::vector<request> requests) {
  return when_any(detail::futures_of(std::move(requests)));
}

}  // namespace mpi
