#include "mpi/typemap.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "mpi/error.hpp"

namespace mpi {
namespace {

constexpr std::size_t round_up(std::size_t value, std::size_t alignment) {
  return (value + alignment - 1) / alignment * alignment;
}

void append_shifted(std::vector<typemap_entry>& out, const typemap& map, std::size_t base) {
  for (const auto& e : map.entries()) out.push_back({base + e.offset, e.kind});
}

error_code mismatch(std::size_t expected, std::size_t actual) {
  return error::length_mismatch.with_message("expected " + std::to_string(expected) +
                                             " bytes, got " + std::to_string(actual));
}

}  // namespace

std::string_view to_string(primitive_kind k) noexcept {
  switch (k) {
    case primitive_kind::int8: return "int8";
    case primitive_kind::int16: return "int16";
    case primitive_kind::int32: return "int32";
    case primitive_kind::int64: return "int64";
    case primitive_kind::uint8: return "uint8";
    case primitive_kind::uint16: return "uint16";
    case primitive_kind::uint32: return "uint32";
    case primitive_kind::uint64: return "uint64";
    case primitive_kind::float32: return "float32";
    case primitive_kind::float64: return "float64";
    case primitive_kind::boolean: return "bool";
    case primitive_kind::byte: return "byte";
    case primitive_kind::complex_float32: return "complex_float32";
    case primitive_kind::complex_float64: return "complex_float64";
  }
  return "unknown";
}

type_descriptor type_descriptor::of(primitive_kind kind) { return type_descriptor{primitive{kind}}; }

type_descriptor type_descriptor::enumeration(primitive_kind underlying) {
  if (!is_integer(underlying))
    throw exception(error::non_compliant_type.with_message(
        "enumeration underlying kind must be an integer kind"));
  return of(underlying);
}

type_descriptor type_descriptor::fixed_array(std::size_t length, type_descriptor element) {
  return type_descriptor{
      array{length, std::make_shared<const type_descriptor>(std::move(element))}};
}

type_descriptor type_descriptor::make_product(std::vector<type_descriptor> fields) {
  return type_descriptor{product{std::move(fields)}};
}

bool operator==(const type_descriptor& a, const type_descriptor& b) {
  if (a.node_.index() != b.node_.index()) return false;
  if (const auto* p = std::get_if<type_descriptor::primitive>(&a.node_))
    return p->kind == std::get<type_descriptor::primitive>(b.node_).kind;
  if (const auto* arr = std::get_if<type_descriptor::array>(&a.node_)) {
    const auto& other = std::get<type_descriptor::array>(b.node_);
    return arr->length == other.length && *arr->element == *other.element;
  }
  return std::get<type_descriptor::product>(a.node_).fields ==
         std::get<type_descriptor::product>(b.node_).fields;
}

bool is_compliant(const type_descriptor& descriptor) {
  return std::visit(
      [](const auto& n) -> bool {
        using node_t = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<node_t, type_descriptor::primitive>) {
          return true;
        } else if constexpr (std::is_same_v<node_t, type_descriptor::array>) {
          return n.length >= 1 && n.element && is_compliant(*n.element);
        } else {
          return !n.fields.empty() && std::all_of(n.fields.begin(), n.fields.end(),
                                                  [](const auto& f) { return is_compliant(f); });
        }
      },
      descriptor.value());
}

typemap::typemap(std::vector<typemap_entry> entries, std::size_t extent, std::size_t alignment)
    : entries_(std::move(entries)), extent_(extent), alignment_(alignment) {
  std::size_t next = 0;
  for (const auto& e : entries_) {
    size_ += size_of(e.kind);
    if (e.offset != next) dense_ = false;
    next = e.offset + size_of(e.kind);
  }
  if (size_ != extent_) dense_ = false;
}

std::string typemap::dump() const {
  std::ostringstream out;
  for (const auto& e : entries_) out << e.offset << '\t' << to_string(e.kind) << '\n';
  out << "size=" << size_ << " extent=" << extent_ << " align=" << alignment_ << '\n';
  return out.str();
}

typemap derive_typemap(const type_descriptor& descriptor) {
  if (!is_compliant(descriptor)) throw exception(error::non_compliant_type);
  return std::visit(
      [](const auto& n) -> typemap {
        using node_t = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<node_t, type_descriptor::primitive>) {
          return typemap{{{0, n.kind}}, size_of(n.kind), alignment_of(n.kind)};
        } else if constexpr (std::is_same_v<node_t, type_descriptor::array>) {
          const typemap element = derive_typemap(*n.element);
          std::vector<typemap_entry> entries;
          entries.reserve(element.entries().size() * n.length);
          for (std::size_t i = 0; i < n.length; ++i)
            append_shifted(entries, element, i * element.extent());
          return typemap{std::move(entries), n.length * element.extent(), element.alignment()};
        } else {
          std::vector<typemap_entry> entries;
          std::size_t offset = 0;
          std::size_t alignment = 1;
          for (const auto& field : n.fields) {
            const typemap child = derive_typemap(field);
            offset = round_up(offset, child.alignment());
            append_shifted(entries, child, offset);
            offset += child.extent();
            alignment = std::max(alignment, child.alignment());
          }
          return typemap{std::move(entries), round_up(offset, alignment), alignment};
        }
      },
      descriptor.value());
}

void pack_into(std::span<const std::byte> values, const typemap& map, std::size_t count,
               std::span<std::byte> out) {
  if (values.size() != count * map.extent()) throw exception(mismatch(count * map.extent(), values.size()));
  if (out.size() != count * map.size()) throw exception(mismatch(count * map.size(), out.size()));
  if (count == 0) return;
  if (map.dense()) {
    std::memcpy(out.data(), values.data(), values.size());
    return;
  }
  std::byte* dst = out.data();
  for (std::size_t i = 0; i < count; ++i) {
    const std::byte* element = values.data() + i * map.extent();
    for (const auto& e : map.entries()) {
      const std::size_t n = size_of(e.kind);
      std::memcpy(dst, element + e.offset, n);
      dst += n;
    }
  }
}

std::vector<std::byte> pack(std::span<const std::byte> values, const typemap& map,
                            std::size_t count) {
  std::vector<std::byte> out(count * map.size());
  pack_into(values, map, count, out);
  return out;
}

void unpack_into(std::span<const std::byte> buffer, const typemap& map, std::size_t count,
                 std::span<std::byte> out) {
  if (buffer.size() != count * map.size()) throw exception(mismatch(count * map.size(), buffer.size()));
  if (out.size() != count * map.extent()) throw exception(mismatch(count * map.extent(), out.size()));
  if (count == 0) return;
  if (map.dense()) {
    std::memcpy(out.data(), buffer.data(), buffer.size());
    return;
  }
  std::fill(out.begin(), out.end(), std::byte{0});
  const std::byte* src = buffer.data();
  for (std::size_t i = 0; i < count; ++i) {
    std::byte* element = out.data() + i * map.extent();
    for (const auto& e : map.entries()) {
      const std::size_t n = size_of(e.kind);
      std::memcpy(element + e.offset, src, n);
      src += n;
    }
  }
}

std::vector<std::byte> unpack(std::span<const std::byte> buffer, const typemap& map,
                              std::size_t count) {
  std::vector<std::byte> out(count * map.extent());
  unpack_into(buffer, map, count, out);
  return out;
}

}  // namespace mpi
