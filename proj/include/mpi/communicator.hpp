#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mpi/buffer.hpp"
#include "mpi/compliant.hpp"
#include "mpi/error.hpp"
#include "mpi/fabric.hpp"
#include "mpi/request.hpp"
#include "mpi/status.hpp"

namespace mpi {

inline constexpr int undefined = -32766;

enum class collective_algorithm { tree, linear };

/// Ordered set of world ranks.
class group {
 public:
  group() = default;
  /// Throws invalid_argument on duplicates or an empty list.
  explicit group(std::vector<int> world_ranks);

  int size() const noexcept { return static_cast<int>(ranks_.size()); }
  int world_rank(int local) const { return ranks_[static_cast<std::size_t>(local)]; }
  /// Local index of a world rank, or -1.
  int local_rank(int world) const noexcept;
  std::span<const int> world_ranks() const noexcept { return ranks_; }

  friend bool operator==(const group&, const group&) = default;

 private:
  std::vector<int> ranks_;
};

namespace detail {

struct comm_core {
  fabric* fab = nullptr;
  int world_rank = 0;
  int context = 0;
  std::shared_ptr<const group> members;
  int rank = 0;

  endpoint ep() const { return endpoint(*fab, world_rank); }
  error_policy policy() const { return fab ? fab->policy() : error_policy::raise; }
  int size() const { return members->size(); }
  int world_of(int local) const { return members->world_rank(local); }
  int local_of(int world) const { return members->local_rank(world); }
  int p2p_context() const { return 2 * context; }
  int collective_context() const { return 2 * context + 1; }
};

request failed_request(const comm_core& core, const error_code& code);
std::unique_ptr<request_impl> send_impl(const comm_core& core, std::vector<std::byte> payload,
                                        int dest, int tag, std::size_t count);
request send_request(const comm_core& core, std::vector<std::byte> payload, int dest, int tag,
                     std::size_t count);
using unpack_fn = std::function<std::size_t(std::span<const std::byte>)>;
std::unique_ptr<request_impl> receive_impl(const comm_core& core, int source, int tag,
                                           std::size_t capacity_bytes, unpack_fn unpack);
std::optional<status> probe(const comm_core& core, int source, int tag, std::size_t element_size,
                            bool blocking);

struct collective_call;
enum class collective_op : std::uint32_t;

}  // namespace detail

/// A communication scope: a context id and an ordered group. Managed handles
/// own their context registration and release it exactly once; unmanaged
/// handles never release. Copying a communicator duplicates it, which is a
/// collective call.
class communicator {
 public:
  struct native_handle_type {
    fabric* fab = nullptr;
    int world_rank = 0;
    int context = 0;
    group members;
  };

  communicator() = default;
  /// Wraps an existing communicator without taking ownership by default.
  explicit communicator(const native_handle_type& handle, bool managed = false);
  communicator(const communicator& other);
  communicator(communicator&& other) noexcept;
  communicator& operator=(const communicator&) = delete;
  communicator& operator=(communicator&& other) noexcept;
  ~communicator();

  int rank() const;
  int size() const;
  const group& members() const;
  int context() const noexcept { return core_.context; }
  bool managed() const noexcept { return managed_; }
  bool live() const noexcept { return live_; }
  native_handle_type native_handle() const;

  /// Releases a managed handle. Later use reports use_after_free.
  void free();

  communicator duplicate() const;
  /// Ranks passing the same color form a communicator ordered by (key, rank).
  /// Passing `undefined` yields nullopt.
  std::optional<communicator> split(int color, int key = 0) const;

  collective_algorithm algorithm() const noexcept { return algorithm_; }
  void set_algorithm(collective_algorithm a) noexcept { algorithm_ = a; }

  // Point-to-point.

  template <buffer T>
  status send(const T& data, int dest, int tag = 0) const {
    return immediate_send(data, dest, tag).wait();
  }
  template <buffer T>
  status receive(T& data, int source = any_source, int tag = any_tag) const {
    return immediate_receive(data, source, tag).wait();
  }

  /// The payload is packed when the call is made, so the buffer may be reused
  /// immediately.
  template <buffer T>
  request immediate_send(const T& data, int dest, int tag = 0) const {
    if (auto e = validate_send(dest, tag); !e.ok()) return detail::failed_request(core_, e);
    return detail::send_request(core_, pack_buffer(data), dest, tag, element_count(data));
  }

  /// `data` must outlive the request; it is written when the request completes.
  template <buffer T>
  request immediate_receive(T& data, int source = any_source, int tag = any_tag) const {
    if (auto e = validate_receive(source, tag); !e.ok()) return detail::failed_request(core_, e);
    return request(core_.ep(), receive_impl_for(data, source, tag));
  }

  /// `data` is read at every start() and must outlive the request.
  template <buffer T>
  request persistent_send(const T& data, int dest, int tag = 0) const {
    if (auto e = validate_send(dest, tag); !e.ok()) return detail::failed_request(core_, e);
    return request::make_persistent(core_.ep(), [core = core_, &data, dest, tag] {
      return detail::send_impl(core, pack_buffer(data), dest, tag, element_count(data));
    });
  }

  template <buffer T>
  request persistent_receive(T& data, int source = any_source, int tag = any_tag) const {
    if (auto e = validate_receive(source, tag); !e.ok()) return detail::failed_request(core_, e);
    return request::make_persistent(core_.ep(), [this_core = core_, &data, source, tag] {
      return receive_impl_for(this_core, data, source, tag);
    });
  }

  /// Status of the earliest matching pending message, or nullopt. The count is
  /// in elements of T.
  template <compliant T = std::byte>
  std::optional<status> immediate_probe(int source = any_source, int tag = any_tag) const {
    if (auto e = validate_receive(source, tag); !e.ok()) return failed_status(e);
    return detail::probe(core_, source, tag, typemap_of<T>().size(), false);
  }

  template <compliant T = std::byte>
  status probe(int source = any_source, int tag = any_tag) const {
    if (auto e = validate_receive(source, tag); !e.ok()) return failed_status(e);
    return *detail::probe(core_, source, tag, typemap_of<T>().size(), true);
  }

  // Collectives; defined in collectives.hpp.

  status barrier() const;
  request immediate_barrier() const;

  template <buffer T>
  status broadcast(T& data, int root = 0) const;
  template <buffer T>
  request immediate_broadcast(T& data, int root = 0) const;

  template <buffer S, buffer R>
  status gather(const S& send, R& recv, int root = 0) const;
  template <buffer S, buffer R>
  request immediate_gather(const S& send, R& recv, int root = 0) const;

  template <buffer S, buffer R>
  status scatter(const S& send, R& recv, int root = 0) const;
  template <buffer S, buffer R>
  request immediate_scatter(const S& send, R& recv, int root = 0) const;

  template <buffer S, buffer R>
  status all_gather(const S& send, R& recv) const;
  template <buffer S, buffer R>
  request immediate_all_gather(const S& send, R& recv) const;

  template <buffer S, buffer R>
  status all_to_all(const S& send, R& recv) const;
  template <buffer S, buffer R>
  request immediate_all_to_all(const S& send, R& recv) const;

  template <buffer T, class Op>
  status reduce(const T& send, T& recv, Op op, int root = 0) const;
  template <buffer T, class Op>
  request immediate_reduce(const T& send, T& recv, Op op, int root = 0) const;

  template <buffer T, class Op>
  status all_reduce(const T& send, T& recv, Op op) const;
  template <buffer T, class Op>
  request immediate_all_reduce(const T& send, T& recv, Op op) const;

  /// `send` holds size() blocks; block i is reduced over all ranks into rank i.
  template <buffer S, buffer R, class Op>
  status reduce_scatter(const S& send, R& recv, Op op) const;
  template <buffer S, buffer R, class Op>
  request immediate_reduce_scatter(const S& send, R& recv, Op op) const;

  template <buffer T, class Op>
  status scan(const T& send, T& recv, Op op) const;
  template <buffer T, class Op>
  request immediate_scan(const T& send, T& recv, Op op) const;

  /// `recv` is reset on rank 0.
  template <buffer T, class Op>
  status exclusive_scan(const T& send, std::optional<T>& recv, Op op) const;
  template <buffer T, class Op>
  request immediate_exclusive_scan(const T& send, std::optional<T>& recv, Op op) const;

  friend bool operator==(const communicator& a, const communicator& b);

  const detail::comm_core& core() const noexcept { return core_; }

 private:
  friend communicator world(endpoint ep);
  communicator(detail::comm_core core, bool managed);

  error_code validate_live() const;
  error_code validate_send(int dest, int tag) const;
  error_code validate_receive(int source, int tag) const;
  error_code validate_root(int root) const;
  status failed_status(const error_code& e) const;
  int next_collective_tag() const;
  detail::collective_call begin_collective(detail::collective_op op, int root, std::uint64_t count,
                                           std::uint64_t op_id, std::uint64_t type_hash,
                                           std::size_t local_count) const;
  request make_request(detail::operation op) const;
  void release() noexcept;

  template <buffer T>
  static std::unique_ptr<detail::request_impl> receive_impl_for(const detail::comm_core& core,
                                                                T& data, int source, int tag) {
    const std::size_t capacity = receive_capacity(data);
    const std::size_t bytes =
        capacity == unbounded ? unbounded : capacity * typemap_of<buffer_element_t<T>>().size();
    return detail::receive_impl(core, source, tag, bytes, [&data](std::span<const std::byte> payload) {
      return unpack_buffer(payload, data);
    });
  }
  template <buffer T>
  std::unique_ptr<detail::request_impl> receive_impl_for(T& data, int source, int tag) const {
    return receive_impl_for(core_, data, source, tag);
  }

  detail::comm_core core_;
  bool managed_ = false;
  bool live_ = false;
  collective_algorithm algorithm_ = collective_algorithm::tree;
  mutable int collective_seq_ = 0;
};

/// Managed communicator over every rank of the fabric, context 0.
communicator world(endpoint ep);

}  // namespace mpi
