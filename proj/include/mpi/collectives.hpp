#pragma once

// Typed front-end of the collective operations. Buffers are packed into
// frames, the byte-level algorithms in detail/collective_core.hpp move them,
// and sinks unpack results into the caller's buffers on completion. For the
// immediate forms every output buffer must outlive the returned request.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <optional>
#include <type_traits>
#include <vector>

#include "mpi/buffer.hpp"
#include "mpi/communicator.hpp"
#include "mpi/detail/collective_core.hpp"
#include "mpi/reduce_op.hpp"

namespace mpi {
namespace detail {

/// Element-wise reduction over packed payloads of E.
template <compliant E, class Op>
combiner make_combiner(Op op) {
  return [op = std::move(op)](std::span<const std::byte> left, std::span<std::byte> right) {
    const typemap& map = typemap_of<E>();
    const std::size_t n = left.size() / map.size();
    if (map.dense() && reinterpret_cast<std::uintptr_t>(left.data()) % alignof(E) == 0 &&
        reinterpret_cast<std::uintptr_t>(right.data()) % alignof(E) == 0) {
      const E* a = reinterpret_cast<const E*>(left.data());
      E* b = reinterpret_cast<E*>(right.data());
      for (std::size_t i = 0; i < n; ++i) b[i] = op(a[i], b[i]);
      return;
    }
    if (map.dense()) {
      constexpr std::size_t chunk = sizeof(E) >= 1024 ? 1 : 1024 / sizeof(E);
      std::array<E, chunk> a;
      std::array<E, chunk> b;
      for (std::size_t i = 0; i < n; i += chunk) {
        const std::size_t m = std::min(chunk, n - i);
        std::memcpy(a.data(), left.data() + i * sizeof(E), m * sizeof(E));
        std::memcpy(b.data(), right.data() + i * sizeof(E), m * sizeof(E));
        for (std::size_t j = 0; j < m; ++j) b[j] = op(a[j], b[j]);
        std::memcpy(right.data() + i * sizeof(E), b.data(), m * sizeof(E));
      }
      return;
    }
    std::vector<E> a(n);
    std::vector<E> b(n);
    unpack_into(left, map, n, std::as_writable_bytes(std::span(a)));
    unpack_into(right, map, n, std::as_writable_bytes(std::span(b)));
    for (std::size_t i = 0; i < n; ++i) b[i] = op(a[i], b[i]);
    pack_into(std::as_bytes(std::span(b)), map, n, right);
  };
}

/// Unpacks block i of `blocks` equal blocks into element range i of `out`.
/// Resizable buffers are sized on the first block.
template <buffer T>
block_sink unpack_blocks_sink(T& out, std::size_t blocks) {
  return [out = &out, blocks = static_cast<std::uint32_t>(blocks), sized = false](
             std::size_t index, std::span<const std::byte> block) mutable {
    using E = buffer_element_t<T>;
    const typemap& map = typemap_of<E>();
    if (block.size() % map.size() != 0)
      throw exception(error::length_mismatch.with_message("payload is not a whole number of elements"));
    const std::size_t count = block.size() / map.size();
    if (!sized) {
      if constexpr (resizable_buffer<T>) {
        if (element_count(*out) != count * blocks) out->resize(count * blocks);
      } else if (count * blocks > element_count(*out)) {
        throw exception(error::truncation.with_message(
            std::to_string(count * blocks) + " elements do not fit a buffer of " +
            std::to_string(element_count(*out))));
      }
      sized = true;
    }
    auto* data = reinterpret_cast<std::byte*>(element_data(*out)) + index * count * sizeof(E);
    unpack_into(block, map, count, {data, count * sizeof(E)});
    return count;
  };
}

template <buffer T>
sink unpack_into_sink(T& out) {
  return [&out](frame&& f) { return unpack_buffer(payload(f), out); };
}

inline frame pack_frame(std::span<const std::byte> values, const typemap& map, std::size_t count) {
  const std::size_t bytes = count * map.size();
  frame f;
  f.reserve(bytes + frame_trailer);
  if (map.dense() && values.size() == bytes) {
    f.assign(values.begin(), values.end());
  } else {
    f.resize(bytes);
    pack_into(values, map, count, f);
  }
  f.resize(bytes + frame_trailer);
  return f;
}

template <buffer T>
frame pack_frame(const T& b) {
  return pack_frame(value_bytes(b), typemap_of<buffer_element_t<T>>(), element_count(b));
}

/// Packs `b` as `blocks` equal consecutive frames.
template <buffer T>
std::vector<frame> pack_blocks(const T& b, std::size_t blocks) {
  const typemap& map = typemap_of<buffer_element_t<T>>();
  const std::size_t count = element_count(b) / blocks;
  const auto values = value_bytes(b);
  const std::size_t stride = count * map.extent();
  std::vector<frame> out;
  out.reserve(blocks);
  for (std::size_t i = 0; i < blocks; ++i) {
    out.push_back(pack_frame(values.subspan(i * stride, stride), map, count));
  }
  return out;
}

template <buffer T>
std::uint64_t type_hash_of() {
  static const std::uint64_t h = hash_typemap(typemap_of<buffer_element_t<T>>());
  return h;
}

}  // namespace detail

template <buffer T>
status communicator::broadcast(T& data, int root) const {
  return immediate_broadcast(data, root).wait();
}

template <buffer T>
request communicator::immediate_broadcast(T& data, int root) const {
  if (auto e = validate_root(root); !e.ok()) return detail::failed_request(core_, e);
  const bool is_root = core_.rank == root;
  const std::uint64_t count =
      is_root || !resizable_buffer<T> ? element_count(data) : detail::any_count;
  auto call = begin_collective(detail::collective_op::broadcast, root, count, 0,
                               detail::type_hash_of<T>(), element_count(data));
  detail::frame f = is_root ? detail::pack_frame(data) : detail::frame{};
  return make_request(detail::broadcast(std::move(call), root, std::move(f), detail::unpack_into_sink(data)));
}

template <buffer S, buffer R>
status communicator::gather(const S& send, R& recv, int root) const {
  return immediate_gather(send, recv, root).wait();
}

template <buffer S, buffer R>
request communicator::immediate_gather(const S& send, R& recv, int root) const {
  static_assert(std::is_same_v<buffer_element_t<S>, buffer_element_t<R>>,
                "send and receive element types must match");
  if (auto e = validate_root(root); !e.ok()) return detail::failed_request(core_, e);
  const std::size_t count = element_count(send);
  if (core_.rank == root && !resizable_buffer<R> &&
      element_count(recv) != count * static_cast<std::size_t>(core_.size()))
    return detail::failed_request(core_, error::length_mismatch);
  auto call = begin_collective(detail::collective_op::gather, root, count, 0,
                               detail::type_hash_of<S>(), 0);
  return make_request(detail::gather(std::move(call), root, detail::pack_frame(send),
                                     detail::unpack_blocks_sink(recv, static_cast<std::size_t>(core_.size()))));
}

template <buffer S, buffer R>
status communicator::scatter(const S& send, R& recv, int root) const {
  return immediate_scatter(send, recv, root).wait();
}

template <buffer S, buffer R>
request communicator::immediate_scatter(const S& send, R& recv, int root) const {
  static_assert(std::is_same_v<buffer_element_t<S>, buffer_element_t<R>>,
                "send and receive element types must match");
  if (auto e = validate_root(root); !e.ok()) return detail::failed_request(core_, e);
  const auto n = static_cast<std::size_t>(core_.size());
  const bool is_root = core_.rank == root;
  if (is_root && element_count(send) % n != 0)
    return detail::failed_request(core_, error::length_mismatch);
  const std::uint64_t count = is_root                    ? element_count(send) / n
                              : resizable_buffer<R> ? detail::any_count
                                                    : element_count(recv);
  auto call = begin_collective(detail::collective_op::scatter, root, count, 0,
                               detail::type_hash_of<S>(), 0);
  std::vector<detail::frame> blocks;
  if (is_root) blocks = detail::pack_blocks(send, n);
  return make_request(
      detail::scatter(std::move(call), root, std::move(blocks), detail::unpack_blocks_sink(recv, 1)));
}

template <buffer S, buffer R>
status communicator::all_gather(const S& send, R& recv) const {
  return immediate_all_gather(send, recv).wait();
}

template <buffer S, buffer R>
request communicator::immediate_all_gather(const S& send, R& recv) const {
  static_assert(std::is_same_v<buffer_element_t<S>, buffer_element_t<R>>,
                "send and receive element types must match");
  if (auto e = validate_live(); !e.ok()) return detail::failed_request(core_, e);
  const std::size_t count = element_count(send);
  if (!resizable_buffer<R> && element_count(recv) != count * static_cast<std::size_t>(core_.size()))
    return detail::failed_request(core_, error::length_mismatch);
  auto call = begin_collective(detail::collective_op::all_gather, 0, count, 0,
                               detail::type_hash_of<S>(), 0);
  return make_request(detail::all_gather(std::move(call), detail::pack_frame(send),
                                         detail::unpack_blocks_sink(recv, static_cast<std::size_t>(core_.size()))));
}

template <buffer S, buffer R>
status communicator::all_to_all(const S& send, R& recv) const {
  return immediate_all_to_all(send, recv).wait();
}

template <buffer S, buffer R>
request communicator::immediate_all_to_all(const S& send, R& recv) const {
  static_assert(std::is_same_v<buffer_element_t<S>, buffer_element_t<R>>,
                "send and receive element types must match");
  if (auto e = validate_live(); !e.ok()) return detail::failed_request(core_, e);
  const auto n = static_cast<std::size_t>(core_.size());
  if (element_count(send) % n != 0 || (!resizable_buffer<R> && element_count(recv) != element_count(send)))
    return detail::failed_request(core_, error::length_mismatch);
  auto call = begin_collective(detail::collective_op::all_to_all, 0, element_count(send) / n, 0,
                               detail::type_hash_of<S>(), 0);
  return make_request(detail::all_to_all(std::move(call), detail::pack_blocks(send, n),
                                         detail::unpack_blocks_sink(recv, n)));
}

template <buffer T, class Op>
status communicator::reduce(const T& send, T& recv, Op op, int root) const {
  return immediate_reduce(send, recv, std::move(op), root).wait();
}

template <buffer T, class Op>
request communicator::immediate_reduce(const T& send, T& recv, Op op, int root) const {
  if (auto e = validate_root(root); !e.ok()) return detail::failed_request(core_, e);
  auto call = begin_collective(detail::collective_op::reduce, root, element_count(send),
                               operator_id(op), detail::type_hash_of<T>(), 0);
  const bool commutative = is_commutative(op);
  return make_request(detail::reduce(std::move(call), root, detail::pack_frame(send),
                                     detail::make_combiner<buffer_element_t<T>>(std::move(op)),
                                     commutative, detail::unpack_into_sink(recv)));
}

template <buffer T, class Op>
status communicator::all_reduce(const T& send, T& recv, Op op) const {
  return immediate_all_reduce(send, recv, std::move(op)).wait();
}

template <buffer T, class Op>
request communicator::immediate_all_reduce(const T& send, T& recv, Op op) const {
  if (auto e = validate_live(); !e.ok()) return detail::failed_request(core_, e);
  auto call = begin_collective(detail::collective_op::all_reduce, 0, element_count(send),
                               operator_id(op), detail::type_hash_of<T>(), 0);
  const bool commutative = is_commutative(op);
  return make_request(detail::all_reduce(std::move(call), detail::pack_frame(send),
                                         detail::make_combiner<buffer_element_t<T>>(std::move(op)),
                                         commutative, detail::unpack_into_sink(recv)));
}

template <buffer S, buffer R, class Op>
status communicator::reduce_scatter(const S& send, R& recv, Op op) const {
  return immediate_reduce_scatter(send, recv, std::move(op)).wait();
}

template <buffer S, buffer R, class Op>
request communicator::immediate_reduce_scatter(const S& send, R& recv, Op op) const {
  static_assert(std::is_same_v<buffer_element_t<S>, buffer_element_t<R>>,
                "send and receive element types must match");
  if (auto e = validate_live(); !e.ok()) return detail::failed_request(core_, e);
  const auto n = static_cast<std::size_t>(core_.size());
  if (element_count(send) % n != 0) return detail::failed_request(core_, error::length_mismatch);
  auto call = begin_collective(detail::collective_op::reduce_scatter, 0, element_count(send) / n,
                               operator_id(op), detail::type_hash_of<S>(), 0);
  const bool commutative = is_commutative(op);
  return make_request(detail::reduce_scatter(
      std::move(call), detail::pack_frame(send),
      detail::make_combiner<buffer_element_t<S>>(std::move(op)), commutative,
      detail::unpack_blocks_sink(recv, 1)));
}

template <buffer T, class Op>
status communicator::scan(const T& send, T& recv, Op op) const {
  return immediate_scan(send, recv, std::move(op)).wait();
}

template <buffer T, class Op>
request communicator::immediate_scan(const T& send, T& recv, Op op) const {
  if (auto e = validate_live(); !e.ok()) return detail::failed_request(core_, e);
  auto call = begin_collective(detail::collective_op::scan, 0, element_count(send), operator_id(op),
                               detail::type_hash_of<T>(), 0);
  return make_request(detail::scan(std::move(call), detail::pack_frame(send),
                                   detail::make_combiner<buffer_element_t<T>>(std::move(op)),
                                   detail::unpack_into_sink(recv)));
}

template <buffer T, class Op>
status communicator::exclusive_scan(const T& send, std::optional<T>& recv, Op op) const {
  return immediate_exclusive_scan(send, recv, std::move(op)).wait();
}

template <buffer T, class Op>
request communicator::immediate_exclusive_scan(const T& send, std::optional<T>& recv, Op op) const {
  static_assert(std::is_default_constructible_v<T>, "exclusive_scan needs a default-constructible buffer");
  if (auto e = validate_live(); !e.ok()) return detail::failed_request(core_, e);
  auto call = begin_collective(detail::collective_op::exclusive_scan, 0, element_count(send),
                               operator_id(op), detail::type_hash_of<T>(), 0);
  return make_request(detail::exclusive_scan(
      std::move(call), detail::pack_frame(send),
      detail::make_combiner<buffer_element_t<T>>(std::move(op)),
      [&recv](std::optional<detail::frame>&& f) -> std::size_t {
        if (!f) {
          recv.reset();
          return 0;
        }
        if (!recv) recv.emplace();
        return unpack_buffer(detail::payload(*f), *recv);
      }));
}

}  // namespace mpi
