#pragma once

// Buffers accepted by communication calls: a single compliant value, or a
// contiguous container of compliant elements. std::vector, std::basic_string
// and std::valarray are resized on receive; std::span has fixed capacity.

#include <cstddef>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <valarray>
#include <vector>

#include "mpi/compliant.hpp"
#include "mpi/error.hpp"

namespace mpi {
namespace detail {

template <class T>
struct container_traits {
  static constexpr bool is_container = false;
};

template <class T, class A>
struct container_traits<std::vector<T, A>> {
  static constexpr bool is_container = !std::is_same_v<T, bool>;
  static constexpr bool resizable = true;
  using element_type = T;
};

template <class C, class Tr, class A>
struct container_traits<std::basic_string<C, Tr, A>> {
  static constexpr bool is_container = true;
  static constexpr bool resizable = true;
  using element_type = C;
};

template <class T>
struct container_traits<std::valarray<T>> {
  static constexpr bool is_container = true;
  static constexpr bool resizable = true;
  using element_type = T;
};

template <class T, std::size_t E>
struct container_traits<std::span<T, E>> {
  static constexpr bool is_container = true;
  static constexpr bool resizable = false;
  using element_type = std::remove_const_t<T>;
};

}  // namespace detail

template <class T>
concept container_buffer =
    detail::container_traits<std::remove_cvref_t<T>>::is_container &&
    compliant<typename detail::container_traits<std::remove_cvref_t<T>>::element_type>;

template <class T>
concept buffer = compliant<std::remove_cvref_t<T>> || container_buffer<T>;

template <class T>
concept resizable_buffer = container_buffer<T> && detail::container_traits<std::remove_cvref_t<T>>::resizable;

template <class T>
struct buffer_element {
  using type = std::remove_cvref_t<T>;
};
template <container_buffer T>
struct buffer_element<T> {
  using type = typename detail::container_traits<std::remove_cvref_t<T>>::element_type;
};
template <class T>
using buffer_element_t = typename buffer_element<T>::type;

inline constexpr std::size_t unbounded = std::numeric_limits<std::size_t>::max();

template <buffer T>
std::size_t element_count(const T& b) {
  if constexpr (container_buffer<T>) return std::size(b);
  else return 1;
}

template <buffer T>
const buffer_element_t<T>* element_data(const T& b) {
  if constexpr (std::is_same_v<std::remove_cvref_t<T>, std::valarray<buffer_element_t<T>>>)
    return b.size() == 0 ? nullptr : &b[0];
  else if constexpr (container_buffer<T>) return std::data(b);
  else return &b;
}

template <buffer T>
buffer_element_t<T>* element_data(T& b) {
  if constexpr (std::is_same_v<std::remove_cvref_t<T>, std::valarray<buffer_element_t<T>>>)
    return b.size() == 0 ? nullptr : &b[0];
  else if constexpr (container_buffer<T>) return std::data(b);
  else return &b;
}

/// Capacity in elements when receiving into `b`.
template <buffer T>
std::size_t receive_capacity(const T& b) {
  if constexpr (resizable_buffer<T>) return unbounded;
  else return element_count(b);
}

template <buffer T>
std::span<const std::byte> value_bytes(const T& b) {
  const auto n = element_count(b) * sizeof(buffer_element_t<T>);
  return {reinterpret_cast<const std::byte*>(element_data(b)), n};
}

/// Appends `count` packed elements read from `values` to `out`.
inline void append_packed(std::vector<std::byte>& out, std::span<const std::byte> values,
                          const typemap& map, std::size_t count) {
  if (map.dense() && values.size() == count * map.size()) {
    out.insert(out.end(), values.data(), values.data() + values.size());
    return;
  }
  const std::size_t at = out.size();
  out.resize(at + count * map.size());
  pack_into(values, map, count, std::span(out).subspan(at));
}

/// Packs the elements of `b` after `header` reserved bytes.
template <buffer T>
std::vector<std::byte> pack_buffer(const T& b, std::size_t header = 0) {
  const typemap& map = typemap_of<buffer_element_t<T>>();
  const std::size_t count = element_count(b);
  std::vector<std::byte> out;
  out.reserve(header + count * map.size());
  out.resize(header);
  append_packed(out, value_bytes(b), map, count);
  return out;
}

/// Unpacks a wire payload into `b`, resizing resizable containers. Returns the
/// element count. Fixed-capacity buffers that are too small raise truncation.
template <buffer T>
std::size_t unpack_buffer(std::span<const std::byte> payload, T& b) {
  const typemap& map = typemap_of<buffer_element_t<T>>();
  if (payload.size() % map.size() != 0)
    throw exception(error::length_mismatch.with_message("payload is not a whole number of elements"));
  const std::size_t count = payload.size() / map.size();
  if constexpr (resizable_buffer<T>) {
    if (element_count(b) != count) b.resize(count);
  } else if (count > element_count(b)) {
    throw exception(error::truncation.with_message(
        std::to_string(count) + " elements do not fit a buffer of " +
        std::to_string(element_count(b))));
  }
  auto* data = reinterpret_cast<std::byte*>(element_data(b));
  unpack_into(payload, map, count, {data, count * sizeof(buffer_element_t<T>)});
  return count;
}

}  // namespace mpi
