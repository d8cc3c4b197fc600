#pragma once

// The eleven collectives written directly against the fabric: blocking,
// preallocated byte buffers, uint8 wrapping sum, no frames or checks.
// Algorithms follow the library's tree variants so that only the API layer
// differs between the two benchmark modes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mpi/fabric.hpp"

namespace mpi::bench::detail {

struct raw_buffers {
  std::vector<std::uint8_t> in;       // one contribution
  std::vector<std::uint8_t> in_all;   // size() contributions
  std::vector<std::uint8_t> out;      // up to size() contributions
  std::vector<std::uint8_t> acc;      // reduction accumulator
  std::vector<std::uint8_t> partial;  // scan block accumulator
};

class raw_collectives {
 public:
  raw_collectives(fabric& f, int rank, int context);

  void barrier();
  std::span<const std::uint8_t> broadcast(raw_buffers& b);
  std::span<const std::uint8_t> gather(raw_buffers& b);
  std::span<const std::uint8_t> scatter(raw_buffers& b);
  std::span<const std::uint8_t> all_gather(raw_buffers& b);
  std::span<const std::uint8_t> all_to_all(raw_buffers& b);
  std::span<const std::uint8_t> reduce(raw_buffers& b);
  std::span<const std::uint8_t> all_reduce(raw_buffers& b);
  std::span<const std::uint8_t> reduce_scatter(raw_buffers& b);
  std::span<const std::uint8_t> scan(raw_buffers& b);
  std::span<const std::uint8_t> exclusive_scan(raw_buffers& b);

 private:
  void begin();
  void send(int to, const std::uint8_t* data, std::size_t bytes);
  token_ptr post(int from);
  std::vector<std::byte>& wait(const token_ptr& t);
  void binomial_reduce(std::vector<std::uint8_t>& acc);
  void binomial_broadcast(std::uint8_t* data, std::size_t bytes);

  fabric& fab_;
  int rank_;
  int size_;
  int context_;
  int tag_ = 0;
};

}  // namespace mpi::bench::detail
