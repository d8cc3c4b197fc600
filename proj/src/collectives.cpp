#include <algorithm>
#include <cstring>
#include <string>
#include <utility>

#include "mpi/detail/collective_core.hpp"

namespace mpi::detail {
namespace {

std::uint32_t fold(std::uint64_t h) { return static_cast<std::uint32_t>(h ^ (h >> 32)); }

std::uint32_t signature_digest(const signature& sig) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
    h ^= h >> 29;
  };
  mix(static_cast<std::uint64_t>(sig.op));
  mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(sig.root)));
  mix(sig.op_id);
  mix(sig.type_hash);
  return fold(h);
}

constexpr std::uint32_t any_count_tag = 0xffffffffu;

std::uint32_t count_tag(std::uint64_t count) {
  if (count == any_count) return any_count_tag;
  const std::uint32_t t = fold(count * 0x9e3779b97f4a7c15ull);
  return t == any_count_tag ? t - 1 : t;
}

void seal(const collective_call& c) {
  if (c.sealed) return;
  c.digest = signature_digest(c.sig);
  c.count_tag = count_tag(c.sig.count);
  c.sealed = true;
}

void write_trailer(frame& f, const collective_call& c) {
  seal(c);
  std::byte* t = f.data() + f.size() - frame_trailer;
  std::memcpy(t, &c.digest, 4);
  std::memcpy(t + 4, &c.count_tag, 4);
}

void verify(const collective_call& c, const frame& f, int from) {
  seal(c);
  if (f.size() < frame_trailer)
    throw exception(error::collective_mismatch.with_message("short collective frame"));
  const std::byte* t = f.data() + f.size() - frame_trailer;
  std::uint32_t digest = 0;
  std::uint32_t count = 0;
  std::memcpy(&digest, t, 4);
  std::memcpy(&count, t + 4, 4);
  const char* what = nullptr;
  if (digest != c.digest)
    what = "operation, root, reduction operator or element type";
  else if (count != c.count_tag && count != any_count_tag && c.count_tag != any_count_tag)
    what = "element count";
  if (what != nullptr)
    throw exception(error::collective_mismatch.with_message(std::string(what) + " differs from rank " +
                                                            std::to_string(from)));
}

void send(const collective_call& c, int to, frame f) {
  write_trailer(f, c);
  const envelope env{c.core.world_rank, c.core.world_of(to), c.tag, c.core.collective_context(),
                     f.size()};
  const token_ptr t = c.core.fab->post_send(env, std::move(f));
  if (t->failed()) throw exception(t->error());
}

token_ptr post_receive(const collective_call& c, int from) {
  const envelope pattern{c.core.world_of(from), c.core.world_rank, c.tag,
                         c.core.collective_context(), 0};
  return c.core.fab->post_recv(pattern, unbounded);
}

frame take(const collective_call& c, token& t, int from) {
  frame f = std::move(t.payload());
  verify(c, f, from);
  return f;
}

frame copy_block(const frame& source, std::size_t index, std::size_t block) {
  return frame_of(payload(source).subspan(index * block, block));
}


void expect_block(const frame& f, std::size_t block) {
  if (payload(f).size() != block)
    throw exception(error::length_mismatch.with_message("collective block sizes differ"));
}

// right = left (op) right
void combine(const combiner& op, const frame& left, frame& right) {
  if (payload(left).size() != payload(right).size())
    throw exception(error::length_mismatch.with_message("reduction contributions differ in size"));
  op(payload(left), payload(right));
}

status done(const collective_call& c, std::size_t count) {
  status s;
  s.source = c.core.rank;
  s.tag = c.tag;
  s.count = count;
  return s;
}

constexpr bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

std::uint64_t hash_typemap(const typemap& map) {
  // FNV-1a over (offset, kind) pairs and the extent.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (const auto& e : map.entries()) {
    mix(e.offset);
    mix(static_cast<std::uint64_t>(e.kind));
  }
  mix(map.extent());
  return h;
}

operation barrier(collective_call call) {
  const int n = call.core.size();
  const int r = call.core.rank;
  if (call.algorithm == collective_algorithm::linear) {
    if (r == 0) {
      std::vector<token_ptr> arrivals;
      for (int i = 1; i < n; ++i) arrivals.push_back(post_receive(call, i));
      co_await completion_of(arrivals);
      for (int i = 1; i < n; ++i) take(call, *arrivals[static_cast<std::size_t>(i - 1)], i);
      for (int i = 1; i < n; ++i) send(call, i, make_frame(0));
    } else {
      send(call, 0, make_frame(0));
      auto t = post_receive(call, 0);
      co_await completion_of(t);
      take(call, *t, 0);
    }
  } else {
    // Dissemination: ceil(log2 n) rounds.
    for (int k = 1; k < n; k <<= 1) {
      send(call, (r + k) % n, make_frame(0));
      const int from = (r - k + n) % n;
      auto t = post_receive(call, from);
      co_await completion_of(t);
      take(call, *t, from);
    }
  }
  co_return done(call, 0);
}

operation broadcast(collective_call call, int root, frame data, sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  if (call.algorithm == collective_algorithm::linear) {
    if (r == root) {
      for (int i = 0; i < n; ++i)
        if (i != root) send(call, i, data);
      co_return done(call, call.local_count);
    }
    auto t = post_receive(call, root);
    co_await completion_of(t);
    co_return done(call, out(take(call, *t, root)));
  }

  // Binomial tree over ranks relative to the root.
  const int relative = (r - root + n) % n;
  int mask = 1;
  while (mask < n) {
    if (relative & mask) {
      const int from = (relative - mask + root) % n;
      auto t = post_receive(call, from);
      co_await completion_of(t);
      data = take(call, *t, from);
      break;
    }
    mask <<= 1;
  }
  for (mask >>= 1; mask > 0; mask >>= 1)
    if (relative + mask < n) send(call, (relative + mask + root) % n, data);
  if (r == root) co_return done(call, call.local_count);
  co_return done(call, out(std::move(data)));
}

operation gather(collective_call call, int root, frame mine, block_sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  if (r != root) {
    send(call, root, std::move(mine));
    co_return done(call, call.local_count);
  }
  const std::size_t block = payload(mine).size();
  std::size_t count = out(static_cast<std::size_t>(root), payload(mine));
  std::vector<token_ptr> tokens(static_cast<std::size_t>(n));
  std::vector<token_ptr> waiting;
  for (int i = 0; i < n; ++i)
    if (i != root) waiting.push_back(tokens[static_cast<std::size_t>(i)] = post_receive(call, i));
  co_await completion_of(std::move(waiting));
  for (int i = 0; i < n; ++i) {
    if (i == root) continue;
    const frame f = take(call, *tokens[static_cast<std::size_t>(i)], i);
    expect_block(f, block);
    count += out(static_cast<std::size_t>(i), payload(f));
  }
  co_return done(call, count);
}

operation scatter(collective_call call, int root, std::vector<frame> blocks, block_sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  if (r == root) {
    for (int i = 0; i < n; ++i)
      if (i != root) send(call, i, std::move(blocks[static_cast<std::size_t>(i)]));
    co_return done(call, out(0, payload(blocks[static_cast<std::size_t>(root)])));
  }
  auto t = post_receive(call, root);
  co_await completion_of(t);
  const frame f = take(call, *t, root);
  co_return done(call, out(0, payload(f)));
}

operation all_gather(collective_call call, frame mine, block_sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  if (call.algorithm == collective_algorithm::linear) {
    frame gathered;
    std::size_t block = payload(mine).size();
    if (r == 0) gathered = make_frame(block * static_cast<std::size_t>(n));
    block_sink keep1 = [&](std::size_t index, std::span<const std::byte> b) {
      std::memcpy(payload(gathered).data() + index * block, b.data(), b.size());
      return std::size_t{0};
    };
    operation stage1 = gather(call, 0, std::move(mine), std::move(keep1));
    co_await std::move(stage1);
    frame result;
    sink keep2 = [&](frame&& f) {
      result = std::move(f);
      return std::size_t{0};
    };
    frame seed2 = r == 0 ? gathered : frame{};
    operation stage2 = broadcast(call, 0, std::move(seed2), std::move(keep2));
    co_await std::move(stage2);
    if (r == 0) result = std::move(gathered);
    block = payload(result).size() / static_cast<std::size_t>(n);
    std::size_t count = 0;
    for (int i = 0; i < n; ++i)
      count += out(static_cast<std::size_t>(i),
                   payload(result).subspan(static_cast<std::size_t>(i) * block, block));
    co_return done(call, count);
  }

  // Ring: in step s, pass on block (r - s), which arrived in the previous
  // step, and take block (r - s - 1) from the left.
  const std::size_t block = payload(mine).size();
  std::size_t count = out(static_cast<std::size_t>(r), payload(mine));
  frame carry = std::move(mine);
  const int right = (r + 1) % n;
  const int left = (r - 1 + n) % n;
  for (int s = 0; s < n - 1; ++s) {
    const auto incoming = static_cast<std::size_t>((r - s - 1 + 2 * n) % n);
    send(call, right, std::move(carry));
    auto t = post_receive(call, left);
    co_await completion_of(t);
    carry = take(call, *t, left);
    expect_block(carry, block);
    count += out(incoming, payload(carry));
  }
  co_return done(call, count);
}

operation all_to_all(collective_call call, std::vector<frame> blocks, block_sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  const std::size_t block = payload(blocks[static_cast<std::size_t>(r)]).size();
  std::size_t count = out(static_cast<std::size_t>(r), payload(blocks[static_cast<std::size_t>(r)]));
  if (call.algorithm == collective_algorithm::linear) {
    for (int i = 0; i < n; ++i)
      if (i != r) send(call, i, std::move(blocks[static_cast<std::size_t>(i)]));
    std::vector<token_ptr> tokens(static_cast<std::size_t>(n));
    std::vector<token_ptr> waiting;
    for (int i = 0; i < n; ++i)
      if (i != r) waiting.push_back(tokens[static_cast<std::size_t>(i)] = post_receive(call, i));
    co_await completion_of(std::move(waiting));
    for (int i = 0; i < n; ++i) {
      if (i == r) continue;
      const frame f = take(call, *tokens[static_cast<std::size_t>(i)], i);
      expect_block(f, block);
      count += out(static_cast<std::size_t>(i), payload(f));
    }
  } else {
    // Pairwise exchange.
    for (int s = 1; s < n; ++s) {
      const int to = (r + s) % n;
      const int from = (r - s + n) % n;
      send(call, to, std::move(blocks[static_cast<std::size_t>(to)]));
      auto t = post_receive(call, from);
      co_await completion_of(t);
      const frame f = take(call, *t, from);
      expect_block(f, block);
      count += out(static_cast<std::size_t>(from), payload(f));
    }
  }
  co_return done(call, count);
}

operation reduce(collective_call call, int root, frame mine, combiner op, bool commutative,
                 sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  if (call.algorithm == collective_algorithm::linear) {
    if (r != root) {
      send(call, root, std::move(mine));
      co_return done(call, call.local_count);
    }
    std::vector<token_ptr> tokens(static_cast<std::size_t>(n));
    std::vector<token_ptr> waiting;
    for (int i = 0; i < n; ++i)
      if (i != root) waiting.push_back(tokens[static_cast<std::size_t>(i)] = post_receive(call, i));
    co_await completion_of(std::move(waiting));
    std::vector<frame> blocks(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      blocks[static_cast<std::size_t>(i)] =
          i == root ? std::move(mine) : take(call, *tokens[static_cast<std::size_t>(i)], i);
    frame acc = std::move(blocks[0]);
    for (std::size_t i = 1; i < blocks.size(); ++i) {
      combine(op, acc, blocks[i]);
      acc = std::move(blocks[i]);
    }
    co_return done(call, out(std::move(acc)));
  }

  // Binomial tree. Each subtree covers a contiguous range of relative ranks,
  // so folding lower-range (op) upper-range keeps rank order. Non-commutative
  // operators need the range to start at rank 0.
  const int tree_root = commutative ? root : 0;
  const int relative = (r - tree_root + n) % n;
  frame acc = std::move(mine);
  bool sent = false;
  for (int mask = 1; mask < n; mask <<= 1) {
    if ((relative & mask) == 0) {
      const int child = relative | mask;
      if (child < n) {
        const int from = (child + tree_root) % n;
        auto t = post_receive(call, from);
        co_await completion_of(t);
        frame upper = take(call, *t, from);
        combine(op, acc, upper);
        acc = std::move(upper);
      }
    } else {
      send(call, (relative - mask + tree_root) % n, std::move(acc));
      sent = true;
      break;
    }
  }
  if (tree_root != root) {
    if (r == tree_root) {
      send(call, root, std::move(acc));
      sent = true;
    } else if (r == root) {
      auto t = post_receive(call, tree_root);
      co_await completion_of(t);
      acc = take(call, *t, tree_root);
      sent = false;
    }
  }
  if (r == root && !sent) co_return done(call, out(std::move(acc)));
  co_return done(call, call.local_count);
}

operation all_reduce(collective_call call, frame mine, combiner op, bool commutative, sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  if (call.algorithm == collective_algorithm::tree && is_power_of_two(n)) {
    // Recursive doubling; both partners fold lower (op) upper, so every rank
    // ends with the same value.
    frame acc = std::move(mine);
    for (int mask = 1; mask < n; mask <<= 1) {
      const int partner = r ^ mask;
      send(call, partner, acc);
      auto t = post_receive(call, partner);
      co_await completion_of(t);
      frame theirs = take(call, *t, partner);
      if (partner < r) {
        combine(op, theirs, acc);
      } else {
        combine(op, acc, theirs);
        acc = std::move(theirs);
      }
    }
    co_return done(call, out(std::move(acc)));
  }
  frame reduced;
  sink keep3 = [&](frame&& f) {
    reduced = std::move(f);
    return std::size_t{0};
  };
  operation stage3 = reduce(call, 0, std::move(mine), op, commutative, std::move(keep3));
  co_await std::move(stage3);
  frame result;
  frame seed4 = r == 0 ? reduced : frame{};
  sink keep4 = [&](frame&& f) {
    result = std::move(f);
    return std::size_t{0};
  };
  operation stage4 = broadcast(call, 0, std::move(seed4), std::move(keep4));
  co_await std::move(stage4);
  if (r == 0) result = std::move(reduced);
  co_return done(call, out(std::move(result)));
}

operation reduce_scatter(collective_call call, frame all, combiner op, bool commutative,
                         block_sink out) {
  frame reduced;
  sink keep5 = [&](frame&& f) {
    reduced = std::move(f);
    return std::size_t{0};
  };
  operation stage5 = reduce(call, 0, std::move(all), op, commutative, std::move(keep5));
  co_await std::move(stage5);
  std::size_t count = 0;
  block_sink keep6 = [&](std::size_t index, std::span<const std::byte> b) {
    count = out(index, b);
    return count;
  };
  std::vector<frame> pieces;
  if (call.core.rank == 0) {
    const auto n = static_cast<std::size_t>(call.core.size());
    const std::size_t block = payload(reduced).size() / n;
    for (std::size_t i = 0; i < n; ++i) pieces.push_back(copy_block(reduced, i, block));
  }
  operation stage6 = scatter(call, 0, std::move(pieces), std::move(keep6));
  co_await std::move(stage6);
  co_return done(call, count);
}

operation scan(collective_call call, frame mine, combiner op, sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  if (call.algorithm == collective_algorithm::linear) {
    // Chain: the prefix travels from rank 0 upwards.
    frame acc = std::move(mine);
    if (r > 0) {
      auto t = post_receive(call, r - 1);
      co_await completion_of(t);
      const frame prefix = take(call, *t, r - 1);
      combine(op, prefix, acc);
    }
    if (r + 1 < n) send(call, r + 1, acc);
    co_return done(call, out(std::move(acc)));
  }

  // Recursive doubling. `partial` folds the aligned block containing r;
  // `result` folds its part up to and including r.
  frame partial = mine;
  frame result = std::move(mine);
  for (int mask = 1; mask < n; mask <<= 1) {
    const int partner = r ^ mask;
    if (partner >= n) continue;
    send(call, partner, partial);
    auto t = post_receive(call, partner);
    co_await completion_of(t);
    frame theirs = take(call, *t, partner);
    if (partner < r) {
      combine(op, theirs, partial);
      combine(op, theirs, result);
    } else {
      combine(op, partial, theirs);
      partial = std::move(theirs);
    }
  }
  co_return done(call, out(std::move(result)));
}

operation exclusive_scan(collective_call call, frame mine, combiner op, optional_sink out) {
  const int n = call.core.size();
  const int r = call.core.rank;
  std::optional<frame> result;
  if (call.algorithm == collective_algorithm::linear) {
    if (r > 0) {
      auto t = post_receive(call, r - 1);
      co_await completion_of(t);
      frame prefix = take(call, *t, r - 1);
      if (r + 1 < n) {
        combine(op, prefix, mine);
        send(call, r + 1, std::move(mine));
      }
      result = std::move(prefix);
    } else if (n > 1) {
      send(call, 1, std::move(mine));
    }
    co_return done(call, out(std::move(result)));
  }

  frame partial = std::move(mine);
  for (int mask = 1; mask < n; mask <<= 1) {
    const int partner = r ^ mask;
    if (partner >= n) continue;
    send(call, partner, partial);
    auto t = post_receive(call, partner);
    co_await completion_of(t);
    frame theirs = take(call, *t, partner);
    if (partner < r) {
      combine(op, theirs, partial);
      if (result) combine(op, theirs, *result);
      else result = std::move(theirs);
    } else {
      combine(op, partial, theirs);
      partial = std::move(theirs);
    }
  }
  co_return done(call, out(std::move(result)));
}

}  // namespace mpi::detail
