#include "mpi/request.hpp"

#include <algorithm>

namespace mpi {

request::request(endpoint ep, std::unique_ptr<detail::request_impl> impl)
    : ep_(ep), kind_(kind::immediate), state_(state::active), impl_(std::move(impl)) {}

request request::make_persistent(endpoint ep, detail::request_factory factory) {
  request r;
  r.ep_ = ep;
  r.kind_ = kind::persistent;
  r.state_ = state::inactive;
  r.factory_ = std::move(factory);
  return r;
}

error_policy request::policy() const noexcept {
  return ep_ ? ep_->get_fabric().policy() : error_policy::raise;
}

status request::misuse(const error_code& code) {
  status s;
  s.error = check(code, policy());
  return s;
}

error_code request::start() {
  if (is_null()) return check(error::inactive_request, policy());
  if (kind_ == kind::immediate) return check(error::start_on_immediate, policy());
  if (state_ != state::inactive) return check(error::start_on_active, policy());
  impl_ = factory_();
  state_ = state::active;
  return {};
}

bool request::progress() {
  if (state_ == state::complete) return true;
  if (state_ != state::active) return false;
  if (impl_->progress()) state_ = state::complete;
  return state_ == state::complete;
}

void request::pending(std::vector<token*>& out) const {
  if (state_ == state::active) impl_->pending(out);
}

void request::block() {
  if (progress() || state_ != state::active) return;
  thread_local std::vector<token*> scratch;
  std::vector<token*> tokens = std::move(scratch);
  do {
    tokens.clear();
    pending(tokens);
    if (tokens.empty())
      throw exception(error::internal.with_message("operation is stalled with nothing pending"));
    ep_->get_fabric().wait_any(ep_->rank(), tokens);
  } while (!progress() && state_ == state::active);
  scratch = std::move(tokens);
}

status request::take() {
  status s = impl_->result();
  impl_.reset();
  state_ = kind_ == kind::persistent ? state::inactive : state::consumed;
  return s;
}

status request::wait() {
  if (is_null()) return misuse(error::inactive_request);
  if (state_ == state::consumed) return misuse(error::use_of_completed_request);
  if (state_ == state::inactive) return misuse(error::inactive_request);
  block();
  status s = take();
  check(s.error, policy());
  return s;
}

std::optional<status> request::test() {
  if (is_null()) return misuse(error::inactive_request);
  if (state_ == state::consumed) return misuse(error::use_of_completed_request);
  if (state_ == state::inactive || !progress()) return std::nullopt;
  status s = take();
  check(s.error, policy());
  return s;
}

namespace detail {

void block_all(std::span<request* const> requests) {
  std::vector<token*> tokens;
  while (true) {
    tokens.clear();
    std::optional<endpoint> ep;
    for (request* r : requests) {
      if (r->progress() || r->get_state() != request::state::active) continue;
      r->pending(tokens);
      ep = r->get_endpoint();
    }
    if (!ep) return;
    if (tokens.empty())
      throw exception(error::internal.with_message("operation is stalled with nothing pending"));
    ep->get_fabric().wait_any(ep->rank(), tokens);
  }
}

}  // namespace detail

std::vector<status> wait_all(std::span<request> requests) {
  std::vector<request*> active;
  for (auto& r : requests)
    if (r.get_state() == request::state::active || r.get_state() == request::state::complete)
      active.push_back(&r);
  detail::block_all(active);
  std::vector<status> statuses(requests.size());
  const error_code* first_error = nullptr;
  error_policy policy = error_policy::raise;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    auto& r = requests[i];
    if (r.is_null()) {
      statuses[i].error = error::inactive_request;
    } else if (r.get_state() == request::state::complete) {
      statuses[i] = r.take();
    } else if (r.get_state() == request::state::consumed) {
      statuses[i].error = error::use_of_completed_request;
    } else {
      statuses[i].error = error::inactive_request;
    }
    if (!r.is_null()) policy = r.policy();
    if (!statuses[i].error.ok() && first_error == nullptr) first_error = &statuses[i].error;
  }
  if (first_error != nullptr) check(*first_error, policy);
  return statuses;
}

std::pair<std::size_t, status> wait_any(std::span<request> requests) {
  std::vector<token*> tokens;
  error_policy policy = error_policy::raise;
  for (const auto& r : requests)
    if (!r.is_null()) policy = r.policy();
  while (true) {
    tokens.clear();
    std::optional<endpoint> ep;
    for (std::size_t i = 0; i < requests.size(); ++i) {
      auto& r = requests[i];
      if (r.progress()) {
        status s = r.take();
        check(s.error, r.policy());
        return {i, s};
      }
      if (r.get_state() == request::state::active) {
        r.pending(tokens);
        ep = r.get_endpoint();
      }
    }
    if (!ep) {
      status s;
      s.error = check(error::empty_set, policy);
      return {requests.size(), s};
    }
    ep->get_fabric().wait_any(ep->rank(), tokens);
  }
}

}  // namespace mpi
