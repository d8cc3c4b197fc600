#include "bench_raw.hpp"

#include <cstring>
#include <limits>

#include "mpi/error.hpp"

namespace mpi::bench::detail {
namespace {

void add_into(std::uint8_t* acc, const std::byte* other, std::size_t n) {
  const auto* o = reinterpret_cast<const std::uint8_t*>(other);
  for (std::size_t i = 0; i < n; ++i) acc[i] = static_cast<std::uint8_t>(acc[i] + o[i]);
}

}  // namespace

raw_collectives::raw_collectives(fabric& f, int rank, int context)
    : fab_(f), rank_(rank), size_(f.world_size()), context_(context) {}

void raw_collectives::begin() { tag_ = (tag_ + 1) & 0x3fffffff; }

void raw_collectives::send(int to, const std::uint8_t* data, std::size_t bytes) {
  const auto* first = reinterpret_cast<const std::byte*>(data);
  std::vector<std::byte> payload(first, first + bytes);
  fab_.post_send(envelope{rank_, to, tag_, context_, bytes}, std::move(payload));
}

token_ptr raw_collectives::post(int from) {
  return fab_.post_recv(envelope{from, rank_, tag_, context_, 0},
                        std::numeric_limits<std::size_t>::max());
}

std::vector<std::byte>& raw_collectives::wait(const token_ptr& t) {
  token* p = t.get();
  fab_.wait_any(rank_, std::span<token* const>(&p, 1));
  if (t->failed()) throw exception(t->error());
  return t->payload();
}

void raw_collectives::barrier() {
  begin();
  for (int k = 1; k < size_; k <<= 1) {
    send((rank_ + k) % size_, nullptr, 0);
    wait(post((rank_ - k + size_) % size_));
  }
}

void raw_collectives::binomial_broadcast(std::uint8_t* data, std::size_t bytes) {
  int mask = 1;
  while (mask < size_) {
    if (rank_ & mask) {
      std::memcpy(data, wait(post(rank_ - mask)).data(), bytes);
      break;
    }
    mask <<= 1;
  }
  for (mask >>= 1; mask > 0; mask >>= 1)
    if (rank_ + mask < size_) send(rank_ + mask, data, bytes);
}

void raw_collectives::binomial_reduce(std::vector<std::uint8_t>& acc) {
  for (int mask = 1; mask < size_; mask <<= 1) {
    if ((rank_ & mask) == 0) {
      const int child = rank_ | mask;
      if (child < size_) add_into(acc.data(), wait(post(child)).data(), acc.size());
    } else {
      send(rank_ - mask, acc.data(), acc.size());
      return;
    }
  }
}

std::span<const std::uint8_t> raw_collectives::broadcast(raw_buffers& b) {
  begin();
  const std::size_t n = b.in.size();
  binomial_broadcast(b.out.data(), n);
  return {b.out.data(), n};
}

std::span<const std::uint8_t> raw_collectives::gather(raw_buffers& b) {
  begin();
  const std::size_t n = b.in.size();
  if (rank_ != 0) {
    send(0, b.in.data(), n);
    return {};
  }
  std::memcpy(b.out.data(), b.in.data(), n);
  std::vector<token_ptr> tokens;
  std::vector<token*> raw;
  for (int i = 1; i < size_; ++i) {
    tokens.push_back(post(i));
    raw.push_back(tokens.back().get());
  }
  fab_.wait_all(rank_, raw);
  for (int i = 1; i < size_; ++i)
    std::memcpy(b.out.data() + static_cast<std::size_t>(i) * n,
                tokens[static_cast<std::size_t>(i - 1)]->payload().data(), n);
  return {b.out.data(), n * static_cast<std::size_t>(size_)};
}

std::span<const std::uint8_t> raw_collectives::scatter(raw_buffers& b) {
  begin();
  const std::size_t n = b.in.size();
  if (rank_ == 0) {
    for (int i = 1; i < size_; ++i)
      send(i, b.in_all.data() + static_cast<std::size_t>(i) * n, n);
    std::memcpy(b.out.data(), b.in_all.data(), n);
  } else {
    std::memcpy(b.out.data(), wait(post(0)).data(), n);
  }
  return {b.out.data(), n};
}

std::span<const std::uint8_t> raw_collectives::all_gather(raw_buffers& b) {
  begin();
  const std::size_t n = b.in.size();
  const auto size = static_cast<std::size_t>(size_);
  std::memcpy(b.out.data() + static_cast<std::size_t>(rank_) * n, b.in.data(), n);
  const int right = (rank_ + 1) % size_;
  const int left = (rank_ - 1 + size_) % size_;
  for (int s = 0; s < size_ - 1; ++s) {
    const auto outgoing = static_cast<std::size_t>((rank_ - s + size_) % size_);
    const auto incoming = static_cast<std::size_t>((rank_ - s - 1 + 2 * size_) % size_);
    send(right, b.out.data() + outgoing * n, n);
    std::memcpy(b.out.data() + incoming * n, wait(post(left)).data(), n);
  }
  return {b.out.data(), n * size};
}

std::span<const std::uint8_t> raw_collectives::all_to_all(raw_buffers& b) {
  begin();
  const std::size_t n = b.in.size();
  const auto r = static_cast<std::size_t>(rank_);
  std::memcpy(b.out.data() + r * n, b.in_all.data() + r * n, n);
  for (int s = 1; s < size_; ++s) {
    const int to = (rank_ + s) % size_;
    const int from = (rank_ - s + size_) % size_;
    send(to, b.in_all.data() + static_cast<std::size_t>(to) * n, n);
    std::memcpy(b.out.data() + static_cast<std::size_t>(from) * n, wait(post(from)).data(), n);
  }
  return {b.out.data(), n * static_cast<std::size_t>(size_)};
}

std::span<const std::uint8_t> raw_collectives::reduce(raw_buffers& b) {
  begin();
  b.acc.assign(b.in.begin(), b.in.end());
  binomial_reduce(b.acc);
  if (rank_ != 0) return {};
  return b.acc;
}

std::span<const std::uint8_t> raw_collectives::all_reduce(raw_buffers& b) {
  begin();
  b.acc.assign(b.in.begin(), b.in.end());
  if ((size_ & (size_ - 1)) == 0) {
    for (int mask = 1; mask < size_; mask <<= 1) {
      const int partner = rank_ ^ mask;
      send(partner, b.acc.data(), b.acc.size());
      add_into(b.acc.data(), wait(post(partner)).data(), b.acc.size());
    }
    return b.acc;
  }
  binomial_reduce(b.acc);
  begin();
  binomial_broadcast(b.acc.data(), b.acc.size());
  return b.acc;
}

std::span<const std::uint8_t> raw_collectives::reduce_scatter(raw_buffers& b) {
  begin();
  const std::size_t n = b.in.size();
  b.acc.assign(b.in_all.begin(), b.in_all.end());
  binomial_reduce(b.acc);
  begin();
  if (rank_ == 0) {
    for (int i = 1; i < size_; ++i) send(i, b.acc.data() + static_cast<std::size_t>(i) * n, n);
    std::memcpy(b.out.data(), b.acc.data(), n);
  } else {
    std::memcpy(b.out.data(), wait(post(0)).data(), n);
  }
  return {b.out.data(), n};
}

std::span<const std::uint8_t> raw_collectives::scan(raw_buffers& b) {
  begin();
  b.partial.assign(b.in.begin(), b.in.end());
  b.acc.assign(b.in.begin(), b.in.end());
  for (int mask = 1; mask < size_; mask <<= 1) {
    const int partner = rank_ ^ mask;
    if (partner >= size_) continue;
    send(partner, b.partial.data(), b.partial.size());
    const token_ptr t = post(partner);
    const auto& theirs = wait(t);
    add_into(b.partial.data(), theirs.data(), b.partial.size());
    if (partner < rank_) add_into(b.acc.data(), theirs.data(), b.acc.size());
  }
  return b.acc;
}

std::span<const std::uint8_t> raw_collectives::exclusive_scan(raw_buffers& b) {
  begin();
  b.partial.assign(b.in.begin(), b.in.end());
  bool have = false;
  for (int mask = 1; mask < size_; mask <<= 1) {
    const int partner = rank_ ^ mask;
    if (partner >= size_) continue;
    send(partner, b.partial.data(), b.partial.size());
    const token_ptr t = post(partner);
    const auto& theirs = wait(t);
    add_into(b.partial.data(), theirs.data(), b.partial.size());
    if (partner < rank_) {
      if (have) {
        add_into(b.acc.data(), theirs.data(), b.acc.size());
      } else {
        const auto* first = reinterpret_cast<const std::uint8_t*>(theirs.data());
        b.acc.assign(first, first + b.partial.size());
        have = true;
      }
    }
  }
  if (!have) return {};
  return b.acc;
}

}  // namespace mpi::bench::detail
