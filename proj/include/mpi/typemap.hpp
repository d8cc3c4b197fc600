#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mpi {

enum class primitive_kind : std::uint8_t {
  int8,
  int16,
  int32,
  int64,
  uint8,
  uint16,
  uint32,
  uint64,
  float32,
  float64,
  boolean,
  byte,
  complex_float32,
  complex_float64,
};

inline constexpr primitive_kind all_primitive_kinds[] = {
    primitive_kind::int8,    primitive_kind::int16,   primitive_kind::int32,
    primitive_kind::int64,   primitive_kind::uint8,   primitive_kind::uint16,
    primitive_kind::uint32,  primitive_kind::uint64,  primitive_kind::float32,
    primitive_kind::float64, primitive_kind::boolean, primitive_kind::byte,
    primitive_kind::complex_float32, primitive_kind::complex_float64,
};

constexpr std::size_t size_of(primitive_kind k) noexcept {
  switch (k) {
    case primitive_kind::int8:
    case primitive_kind::uint8:
    case primitive_kind::boolean:
    case primitive_kind::byte: return 1;
    case primitive_kind::int16:
    case primitive_kind::uint16: return 2;
    case primitive_kind::int32:
    case primitive_kind::uint32:
    case primitive_kind::float32: return 4;
    case primitive_kind::int64:
    case primitive_kind::uint64:
    case primitive_kind::float64:
    case primitive_kind::complex_float32: return 8;
    case primitive_kind::complex_float64: return 16;
  }
  return 0;
}

constexpr std::size_t alignment_of(primitive_kind k) noexcept {
  switch (k) {
    case primitive_kind::complex_float32: return 4;
    case primitive_kind::complex_float64: return 8;
    default: return size_of(k);
  }
}

constexpr bool is_integer(primitive_kind k) noexcept {
  return k <= primitive_kind::uint64;
}

std::string_view to_string(primitive_kind k) noexcept;

/// Structural description of a compliant type: primitives, fixed arrays and
/// products (aggregates, pairs, tuples). Descriptors are immutable values;
/// construction does not validate, `is_compliant` does.
class type_descriptor {
 public:
  struct primitive {
    primitive_kind kind;
  };
  struct array {
    std::size_t length;
    std::shared_ptr<const type_descriptor> element;
  };
  struct product {
    std::vector<type_descriptor> fields;
  };
  using node = std::variant<primitive, array, product>;

  static type_descriptor of(primitive_kind kind);
  /// Enumerations lower to an integer kind; int32 unless stated.
  static type_descriptor enumeration(primitive_kind underlying = primitive_kind::int32);
  static type_descriptor fixed_array(std::size_t length, type_descriptor element);
  static type_descriptor make_product(std::vector<type_descriptor> fields);

  const node& value() const noexcept { return node_; }

  friend bool operator==(const type_descriptor& a, const type_descriptor& b);

 private:
  explicit type_descriptor(node n) : node_(std::move(n)) {}
  node node_;
};

bool is_compliant(const type_descriptor& descriptor);

struct typemap_entry {
  std::size_t offset;
  primitive_kind kind;
  friend bool operator==(const typemap_entry&, const typemap_entry&) = default;
};

/// Flat layout of a compliant type: every primitive leaf with its byte offset,
/// the payload size, the array stride (extent) and the alignment.
class typemap {
 public:
  typemap() = default;
  typemap(std::vector<typemap_entry> entries, std::size_t extent, std::size_t alignment);

  std::span<const typemap_entry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t extent() const noexcept { return extent_; }
  std::size_t alignment() const noexcept { return alignment_; }

  /// True when the in-memory and wire forms coincide (no padding anywhere).
  bool dense() const noexcept { return dense_; }

  /// `offset<TAB>kind` per entry, then `size=<n> extent=<n> align=<n>`.
  std::string dump() const;

  friend bool operator==(const typemap& a, const typemap& b) {
    return a.entries_ == b.entries_ && a.size_ == b.size_ && a.extent_ == b.extent_ &&
           a.alignment_ == b.alignment_;
  }

 private:
  std::vector<typemap_entry> entries_;
  std::size_t size_ = 0;
  std::size_t extent_ = 0;
  std::size_t alignment_ = 1;
  bool dense_ = true;
};

/// Flattens a descriptor with C natural alignment. Throws
/// `mpi::exception(non_compliant_type)` for non-compliant descriptors.
typemap derive_typemap(const type_descriptor& descriptor);

/// Copies the entry bytes of `count` elements (each `map.extent()` bytes) into
/// the wire form (each `map.size()` bytes). Throws length_mismatch.
std::vector<std::byte> pack(std::span<const std::byte> values, const typemap& map,
                            std::size_t count);
void pack_into(std::span<const std::byte> values, const typemap& map, std::size_t count,
               std::span<std::byte> out);

/// Inverse of pack. Padding bytes in the output are zeroed.
std::vector<std::byte> unpack(std::span<const std::byte> buffer, const typemap& map,
                              std::size_t count);
void unpack_into(std::span<const std::byte> buffer, const typemap& map, std::size_t count,
                 std::span<std::byte> out);

}  // namespace mpi
