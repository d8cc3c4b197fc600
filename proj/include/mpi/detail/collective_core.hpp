#pragma once

// Byte-level collective algorithms over the fabric. Every message is a frame:
// the packed payload followed by an 8-byte trailer. The trailer holds a 32-bit
// digest of the caller's signature (operation, root, reduction identity,
// element typemap hash) and a 32-bit tag of its element count. Receivers
// compare it with their own signature and fail with collective_mismatch when
// ranks disagree.

#include <coroutine>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mpi/communicator.hpp"
#include "mpi/detail/operation.hpp"

namespace mpi::detail {

enum class collective_op : std::uint32_t {
  barrier = 1,
  broadcast,
  gather,
  scatter,
  all_gather,
  all_to_all,
  reduce,
  all_reduce,
  reduce_scatter,
  scan,
  exclusive_scan,
  duplicate,
  split,
};

inline constexpr std::uint64_t any_count = std::numeric_limits<std::uint64_t>::max();

struct signature {
  collective_op op = collective_op::barrier;
  std::int32_t root = 0;
  std::uint64_t count = 0;  // elements per rank contribution, or any_count
  std::uint64_t op_id = 0;
  std::uint64_t type_hash = 0;
};

inline constexpr std::size_t frame_trailer = 8;

using frame = std::vector<std::byte>;

inline frame make_frame(std::size_t payload_bytes) { return frame(payload_bytes + frame_trailer); }
inline std::span<std::byte> payload(frame& f) {
  return std::span(f).first(f.size() < frame_trailer ? 0 : f.size() - frame_trailer);
}
inline std::span<const std::byte> payload(const frame& f) {
  return std::span(f).first(f.size() < frame_trailer ? 0 : f.size() - frame_trailer);
}
/// A frame holding a copy of `bytes`.
inline frame frame_of(std::span<const std::byte> bytes) {
  frame f;
  f.reserve(bytes.size() + frame_trailer);
  f.insert(f.end(), bytes.begin(), bytes.end());
  f.resize(bytes.size() + frame_trailer);
  return f;
}

/// right = left (op) right, element-wise over packed payloads.
using combiner = std::function<void(std::span<const std::byte> left, std::span<std::byte> right)>;
/// Receives the local result; returns the element count delivered.
using sink = std::function<std::size_t(frame&&)>;
using optional_sink = std::function<std::size_t(std::optional<frame>&&)>;
/// Receives block `index` of a block-structured result straight from the
/// transport; returns the element count delivered.
using block_sink = std::function<std::size_t(std::size_t index, std::span<const std::byte> block)>;

struct collective_call {
  comm_core core;
  int tag = 0;
  signature sig;
  collective_algorithm algorithm = collective_algorithm::tree;
  // Reported as the status count on ranks whose sink is not invoked.
  std::size_t local_count = 0;
  // Trailer words derived from `sig` on first use.
  mutable std::uint32_t digest = 0;
  mutable std::uint32_t count_tag = 0;
  mutable bool sealed = false;
};

std::uint64_t hash_typemap(const typemap& map);

operation barrier(collective_call call);
operation broadcast(collective_call call, int root, frame data, sink out);
operation gather(collective_call call, int root, frame mine, block_sink out);
/// `blocks` holds one frame per rank at the root and is empty elsewhere. The
/// single received block is delivered as index 0.
operation scatter(collective_call call, int root, std::vector<frame> blocks, block_sink out);
operation all_gather(collective_call call, frame mine, block_sink out);
/// `blocks` holds one frame per destination rank.
operation all_to_all(collective_call call, std::vector<frame> blocks, block_sink out);
/// Contributions are folded in rank order; `commutative` allows a tree rooted
/// at `root` instead of rank 0.
operation reduce(collective_call call, int root, frame mine, combiner op, bool commutative, sink out);
operation all_reduce(collective_call call, frame mine, combiner op, bool commutative, sink out);
operation reduce_scatter(collective_call call, frame all, combiner op, bool commutative,
                         block_sink out);
operation scan(collective_call call, frame mine, combiner op, sink out);
operation exclusive_scan(collective_call call, frame mine, combiner op, optional_sink out);

}  // namespace mpi::detail
