#include "mpi/detail/operation.hpp"

#include <new>

namespace mpi::detail {
namespace {

struct cached_frames {
  static constexpr std::size_t capacity = 16;
  struct entry {
    void* p;
    std::size_t bytes;
  };
  entry slots[capacity];
  std::size_t used = 0;

  ~cached_frames() {
    for (std::size_t i = 0; i < used; ++i) ::operator delete(slots[i].p, slots[i].bytes);
  }
};

thread_local cached_frames cache;

}  // namespace

void* frame_cache::allocate(std::size_t bytes) {
  for (std::size_t i = cache.used; i-- > 0;) {
    if (cache.slots[i].bytes != bytes) continue;
    void* p = cache.slots[i].p;
    cache.slots[i] = cache.slots[--cache.used];
    return p;
  }
  return ::operator new(bytes);
}

void frame_cache::release(void* p, std::size_t bytes) noexcept {
  if (cache.used < cached_frames::capacity) {
    cache.slots[cache.used++] = {p, bytes};
    return;
  }
  ::operator delete(p, bytes);
}

}  // namespace mpi::detail
