#include "mpi/communicator.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <numeric>
#include <limits>
#include <set>

#include "mpi/detail/collective_core.hpp"

namespace mpi {

group::group(std::vector<int> world_ranks) : ranks_(std::move(world_ranks)) {
  if (ranks_.empty()) throw exception(error::invalid_argument.with_message("group is empty"));
  std::vector<int> sorted = ranks_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw exception(error::invalid_argument.with_message("group has duplicate ranks"));
}

int group::local_rank(int world) const noexcept {
  const auto it = std::find(ranks_.begin(), ranks_.end(), world);
  return it == ranks_.end() ? -1 : static_cast<int>(it - ranks_.begin());
}

namespace detail {
namespace {

class receive_request final : public request_impl {
 public:
  receive_request(token_ptr t, std::shared_ptr<const group> members, unpack_fn unpack)
      : token_(std::move(t)), members_(std::move(members)), unpack_(std::move(unpack)) {}

  bool progress() override { return token_->done(); }
  void pending(std::vector<token*>& out) const override { out.push_back(token_.get()); }
  status result() override {
    status s;
    const envelope& env = token_->matched();
    s.source = env.source == any_source ? any_source : members_->local_rank(env.source);
    s.tag = env.tag;
    if (token_->failed()) {
      s.error = token_->error();
      return s;
    }
    try {
      s.count = unpack_(token_->payload());
    } catch (const exception& e) {
      s.error = e.code();
    }
    return s;
  }

 private:
  token_ptr token_;
  std::shared_ptr<const group> members_;
  unpack_fn unpack_;
};

}  // namespace

request failed_request(const comm_core& core, const error_code& code) {
  status s;
  s.error = code;
  if (core.fab == nullptr) throw exception(code);
  return request(core.ep(), std::make_unique<completed_request>(std::move(s)));
}

std::unique_ptr<request_impl> send_impl(const comm_core& core, std::vector<std::byte> payload,
                                        int dest, int tag, std::size_t count) {
  const envelope env{core.world_rank, core.world_of(dest), tag, core.p2p_context(), payload.size()};
  const token_ptr t = core.fab->post_send(env, std::move(payload));
  status s;
  s.source = core.rank;
  s.tag = tag;
  s.count = count;
  if (t->failed()) s.error = t->error();
  return std::make_unique<completed_request>(std::move(s));
}

request send_request(const comm_core& core, std::vector<std::byte> payload, int dest, int tag,
                     std::size_t count) {
  return request(core.ep(), send_impl(core, std::move(payload), dest, tag, count));
}

std::unique_ptr<request_impl> receive_impl(const comm_core& core, int source, int tag,
                                           std::size_t capacity_bytes, unpack_fn unpack) {
  const envelope pattern{source == any_source ? any_source : core.world_of(source), core.world_rank,
                         tag, core.p2p_context(), 0};
  return std::make_unique<receive_request>(core.fab->post_recv(pattern, capacity_bytes),
                                           core.members, std::move(unpack));
}

std::optional<status> probe(const comm_core& core, int source, int tag, std::size_t element_size,
                            bool blocking) {
  const envelope pattern{source == any_source ? any_source : core.world_of(source), core.world_rank,
                         tag, core.p2p_context(), 0};
  const auto found = core.fab->probe(pattern, blocking);
  if (!found) return std::nullopt;
  status s;
  s.source = core.local_of(found->source);
  s.tag = found->tag;
  s.count = found->length / element_size;
  return s;
}

}  // namespace detail

communicator::communicator(detail::comm_core core, bool managed)
    : core_(std::move(core)), managed_(managed), live_(true) {
  if (managed_) core_.fab->acquire_context(core_.context);
}

communicator::communicator(const native_handle_type& handle, bool managed)
    : communicator(detail::comm_core{handle.fab, handle.world_rank, handle.context,
                                     std::make_shared<const group>(handle.members),
                                     handle.members.local_rank(handle.world_rank)},
                   managed) {
  if (core_.rank < 0)
    throw exception(error::invalid_rank.with_message("calling rank is not a member of the group"));
}

communicator::communicator(const communicator& other) : communicator(other.duplicate()) {}

communicator::communicator(communicator&& other) noexcept
    : core_(std::move(other.core_)),
      managed_(std::exchange(other.managed_, false)),
      live_(std::exchange(other.live_, false)),
      algorithm_(other.algorithm_),
      collective_seq_(other.collective_seq_) {
  other.core_.fab = core_.fab;
}

communicator& communicator::operator=(communicator&& other) noexcept {
  if (this != &other) {
    release();
    core_ = std::move(other.core_);
    other.core_.fab = core_.fab;
    managed_ = std::exchange(other.managed_, false);
    live_ = std::exchange(other.live_, false);
    algorithm_ = other.algorithm_;
    collective_seq_ = other.collective_seq_;
  }
  return *this;
}

communicator::~communicator() { release(); }

void communicator::release() noexcept {
  if (live_ && managed_) {
    try {
      core_.fab->release_context(core_.context);
    } catch (...) {
    }
  }
  live_ = false;
}

void communicator::free() {
  if (auto e = validate_live(); !e.ok()) return;
  release();
}

error_code communicator::validate_live() const {
  if (!live_) return check(error::use_after_free, core_.policy());
  return {};
}

error_code communicator::validate_send(int dest, int tag) const {
  if (!live_) return error::use_after_free;
  if (dest < 0 || dest >= core_.size()) return error::invalid_rank;
  if (tag < 0) return error::invalid_tag;
  return {};
}

error_code communicator::validate_receive(int source, int tag) const {
  if (!live_) return error::use_after_free;
  if (source != any_source && (source < 0 || source >= core_.size())) return error::invalid_source;
  if (tag != any_tag && tag < 0) return error::invalid_tag;
  return {};
}

error_code communicator::validate_root(int root) const {
  if (!live_) return error::use_after_free;
  if (root < 0 || root >= core_.size()) return error::invalid_root;
  return {};
}

status communicator::failed_status(const error_code& e) const {
  status s;
  s.error = check(e, core_.policy());
  return s;
}

int communicator::next_collective_tag() const {
  const int tag = collective_seq_;
  collective_seq_ = collective_seq_ == std::numeric_limits<int>::max() ? 0 : collective_seq_ + 1;
  return tag;
}

detail::collective_call communicator::begin_collective(detail::collective_op op, int root,
                                                       std::uint64_t count, std::uint64_t op_id,
                                                       std::uint64_t type_hash,
                                                       std::size_t local_count) const {
  return detail::collective_call{core_, next_collective_tag(),
                                 detail::signature{op, root, count, op_id, type_hash}, algorithm_,
                                 local_count};
}

request communicator::make_request(detail::operation op) const {
  return request(core_.ep(), std::make_unique<detail::operation_request>(std::move(op)));
}

status communicator::barrier() const { return immediate_barrier().wait(); }

request communicator::immediate_barrier() const {
  if (auto e = validate_live(); !e.ok()) return detail::failed_request(core_, e);
  return make_request(detail::barrier(begin_collective(detail::collective_op::barrier, 0, 0, 0, 0, 0)));
}

int communicator::rank() const {
  if (auto e = validate_live(); !e.ok()) return -1;
  return core_.rank;
}

int communicator::size() const {
  if (auto e = validate_live(); !e.ok()) return 0;
  return core_.size();
}

const group& communicator::members() const {
  static const group empty;
  if (auto e = validate_live(); !e.ok()) return empty;
  return *core_.members;
}

communicator::native_handle_type communicator::native_handle() const {
  return {core_.fab, core_.world_rank, core_.context, live_ ? *core_.members : group{}};
}

bool operator==(const communicator& a, const communicator& b) {
  if (!a.live_ || !b.live_) return a.live_ == b.live_;
  return a.core_.context == b.core_.context && *a.core_.members == *b.core_.members;
}

namespace {

detail::frame int_frame(std::span<const std::int64_t> values) {
  detail::frame f = detail::make_frame(values.size_bytes());
  std::memcpy(detail::payload(f).data(), values.data(), values.size_bytes());
  return f;
}

std::vector<std::int64_t> frame_ints(const detail::frame& f) {
  const auto p = detail::payload(f);
  std::vector<std::int64_t> values(p.size() / sizeof(std::int64_t));
  std::memcpy(values.data(), p.data(), values.size() * sizeof(std::int64_t));
  return values;
}

status run_blocking(const detail::comm_core& core, detail::operation op) {
  return request(core.ep(), std::make_unique<detail::operation_request>(std::move(op))).wait();
}

}  // namespace

communicator communicator::duplicate() const {
  if (auto e = validate_live(); !e.ok()) return communicator{};
  detail::collective_call call{core_, next_collective_tag(),
                               {detail::collective_op::duplicate, 0, 1, 0, 0}, algorithm_};
  const std::int64_t allocated = core_.rank == 0 ? core_.fab->allocate_context() : -1;
  std::int64_t context = allocated;
  const status s = run_blocking(
      core_, detail::broadcast(call, 0, int_frame({&allocated, 1}), [&](detail::frame&& f) {
        context = frame_ints(f).at(0);
        return std::size_t{1};
      }));
  if (!s.error.ok()) return communicator{};
  detail::comm_core core = core_;
  core.context = static_cast<int>(context);
  communicator dup(std::move(core), true);
  dup.algorithm_ = algorithm_;
  return dup;
}

std::optional<communicator> communicator::split(int color, int key) const {
  if (auto e = validate_live(); !e.ok()) return std::nullopt;
  const int n = core_.size();
  detail::collective_call call{core_, next_collective_tag(),
                               {detail::collective_op::split, 0, 2, 0, 0}, algorithm_};
  const std::array<std::int64_t, 2> mine{color, key};
  std::vector<std::int64_t> table(2 * static_cast<std::size_t>(n));
  status s = run_blocking(
      core_, detail::all_gather(call, int_frame(mine),
                                [&](std::size_t index, std::span<const std::byte> block) {
                                  if (block.size() != 2 * sizeof(std::int64_t))
                                    throw exception(error::collective_mismatch);
                                  std::memcpy(table.data() + 2 * index, block.data(), block.size());
                                  return std::size_t{2};
                                }));
  if (!s.error.ok()) return std::nullopt;

  // Rank 0 allocates one context per defined color, in ascending color order.
  std::set<std::int64_t> colors;
  for (int r = 0; r < n; ++r)
    if (table[2 * r] != undefined) colors.insert(table[2 * r]);
  std::vector<std::int64_t> contexts;
  if (core_.rank == 0)
    for (std::size_t i = 0; i < colors.size(); ++i) contexts.push_back(core_.fab->allocate_context());
  call.tag = next_collective_tag();
  call.sig.count = detail::any_count;
  call.sealed = false;
  s = run_blocking(core_, detail::broadcast(call, 0, int_frame(contexts), [&](detail::frame&& f) {
                     contexts = frame_ints(f);
                     return contexts.size();
                   }));
  if (!s.error.ok()) return std::nullopt;
  if (color == undefined) return std::nullopt;

  std::vector<int> members;
  for (int r = 0; r < n; ++r)
    if (table[2 * r] == color) members.push_back(r);
  std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
    return std::pair(table[2 * a + 1], a) < std::pair(table[2 * b + 1], b);
  });
  std::vector<int> world_ranks;
  for (int r : members) world_ranks.push_back(core_.world_of(r));
  const auto index = std::distance(colors.begin(), colors.find(color));

  detail::comm_core core = core_;
  core.context = static_cast<int>(contexts.at(static_cast<std::size_t>(index)));
  core.members = std::make_shared<const group>(std::move(world_ranks));
  core.rank = core.members->local_rank(core.world_rank);
  communicator result(std::move(core), true);
  result.algorithm_ = algorithm_;
  return result;
}

communicator world(endpoint ep) {
  std::vector<int> ranks(static_cast<std::size_t>(ep.get_fabric().world_size()));
  std::iota(ranks.begin(), ranks.end(), 0);
  detail::comm_core core{&ep.get_fabric(), ep.rank(), 0, std::make_shared<const group>(std::move(ranks)),
                         ep.rank()};
  return communicator(std::move(core), true);
}

}  // namespace mpi
