#pragma once

// Compile-time reflection of compliant types. Arithmetic types, enumerations,
// std::byte and std::complex map onto primitive kinds; C arrays, std::array,
// std::pair, std::tuple and aggregates of compliant types are compliant.
//
// Aggregates are introspected by counting the initializers they accept and
// binding their fields with structured bindings, so no registration is needed.
// Aggregates with base classes are not reflectable.

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "mpi/typemap.hpp"

namespace mpi {
namespace detail {

template <class T>
constexpr bool has_primitive_kind() {
  if constexpr (std::is_same_v<T, bool> || std::is_same_v<T, std::byte> ||
                std::is_same_v<T, std::complex<float>> || std::is_same_v<T, std::complex<double>>)
    return true;
  else if constexpr (std::is_enum_v<T>)
    return has_primitive_kind<std::underlying_type_t<T>>();
  else if constexpr (std::is_integral_v<T>)
    return sizeof(T) == 1 || sizeof(T) == 2 || sizeof(T) == 4 || sizeof(T) == 8;
  else
    return std::is_same_v<T, float> || std::is_same_v<T, double>;
}

template <class T>
constexpr primitive_kind kind_of() {
  if constexpr (std::is_same_v<T, bool>) return primitive_kind::boolean;
  else if constexpr (std::is_same_v<T, std::byte>) return primitive_kind::byte;
  else if constexpr (std::is_same_v<T, std::complex<float>>) return primitive_kind::complex_float32;
  else if constexpr (std::is_same_v<T, std::complex<double>>) return primitive_kind::complex_float64;
  else if constexpr (std::is_enum_v<T>) return kind_of<std::underlying_type_t<T>>();
  else if constexpr (std::is_same_v<T, float>) return primitive_kind::float32;
  else if constexpr (std::is_same_v<T, double>) return primitive_kind::float64;
  else if constexpr (std::is_signed_v<T>) {
    if constexpr (sizeof(T) == 1) return primitive_kind::int8;
    else if constexpr (sizeof(T) == 2) return primitive_kind::int16;
    else if constexpr (sizeof(T) == 4) return primitive_kind::int32;
    else return primitive_kind::int64;
  } else {
    if constexpr (sizeof(T) == 1) return primitive_kind::uint8;
    else if constexpr (sizeof(T) == 2) return primitive_kind::uint16;
    else if constexpr (sizeof(T) == 4) return primitive_kind::uint32;
    else return primitive_kind::uint64;
  }
}

template <class T>
struct is_std_array : std::false_type {};
template <class T, std::size_t N>
struct is_std_array<std::array<T, N>> : std::true_type {};

template <class T>
struct is_pair : std::false_type {};
template <class A, class B>
struct is_pair<std::pair<A, B>> : std::true_type {};

template <class T>
struct is_tuple : std::false_type {};
template <class... Ts>
struct is_tuple<std::tuple<Ts...>> : std::true_type {};

// Converts only to a base class of T; accepted as the first initializer
// exactly when T has a base.
template <class T>
struct base_probe {
  template <class U>
    requires(std::is_base_of_v<U, T> && !std::is_same_v<U, T>)
  constexpr operator U() const noexcept;
};

template <class T>
constexpr bool has_base_class() {
  return requires { T{base_probe<T>{}}; };
}

// Each field gets its own empty braces, so array members count once.
template <class T, std::size_t N>
constexpr bool braces_fit = false;

#define MPI_DETAIL_BRACES(n, ...) \
  template <class T>              \
  constexpr bool braces_fit<T, n> = requires { T{__VA_ARGS__}; };
MPI_DETAIL_BRACES(1, {})
MPI_DETAIL_BRACES(2, {}, {})
MPI_DETAIL_BRACES(3, {}, {}, {})
MPI_DETAIL_BRACES(4, {}, {}, {}, {})
MPI_DETAIL_BRACES(5, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(6, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(7, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(8, {}, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(9, {}, {}, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(10, {}, {}, {}, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(11, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(12, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(13, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(14, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(15, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {})
MPI_DETAIL_BRACES(16, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {})
#undef MPI_DETAIL_BRACES

inline constexpr std::size_t max_reflected_fields = 16;

template <class T, std::size_t N = max_reflected_fields>
constexpr std::size_t field_count() {
  if constexpr (N == 0) return 0;
  else if constexpr (braces_fit<T, N>) return N;
  else return field_count<T, N - 1>();
}

template <class T>
constexpr bool is_reflectable_aggregate() {
  if constexpr (!std::is_class_v<T> || !std::is_aggregate_v<T> || is_std_array<T>::value ||
                is_pair<T>::value || is_tuple<T>::value || std::is_polymorphic_v<T> ||
                has_base_class<T>())
    return false;
  else
    return field_count<T>() > 0;
}

#define MPI_DETAIL_TIE(n, ...)        \
  if constexpr (count == n) {         \
    auto& [__VA_ARGS__] = value;      \
    return std::tie(__VA_ARGS__);     \
  } else

/// Binds the fields of an aggregate as a tuple of references.
template <class T>
auto tie_fields(T& value) {
  constexpr std::size_t count = field_count<std::remove_const_t<T>>();
  MPI_DETAIL_TIE(1, a1)
  MPI_DETAIL_TIE(2, a1, a2)
  MPI_DETAIL_TIE(3, a1, a2, a3)
  MPI_DETAIL_TIE(4, a1, a2, a3, a4)
  MPI_DETAIL_TIE(5, a1, a2, a3, a4, a5)
  MPI_DETAIL_TIE(6, a1, a2, a3, a4, a5, a6)
  MPI_DETAIL_TIE(7, a1, a2, a3, a4, a5, a6, a7)
  MPI_DETAIL_TIE(8, a1, a2, a3, a4, a5, a6, a7, a8)
  MPI_DETAIL_TIE(9, a1, a2, a3, a4, a5, a6, a7, a8, a9)
  MPI_DETAIL_TIE(10, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10)
  MPI_DETAIL_TIE(11, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11)
  MPI_DETAIL_TIE(12, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12)
  MPI_DETAIL_TIE(13, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12, a13)
  MPI_DETAIL_TIE(14, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12, a13, a14)
  MPI_DETAIL_TIE(15, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12, a13, a14, a15)
  MPI_DETAIL_TIE(16, a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12, a13, a14, a15, a16) {
    static_assert(count > 0, "type is not a reflectable aggregate");
  }
}

#undef MPI_DETAIL_TIE

template <class T>
using field_tuple_t = decltype(tie_fields(std::declval<T&>()));

template <class T>
constexpr bool compliant_v();

template <class Tuple>
constexpr bool all_fields_compliant() {
  return []<std::size_t... I>(std::index_sequence<I...>) {
    return (compliant_v<std::remove_cvref_t<std::tuple_element_t<I, Tuple>>>() && ...);
  }(std::make_index_sequence<std::tuple_size_v<Tuple>>{});
}

template <class T>
constexpr bool compliant_v() {
  if constexpr (std::is_const_v<T> || std::is_volatile_v<T>)
    return compliant_v<std::remove_cv_t<T>>();
  else if constexpr (has_primitive_kind<T>())
    return true;
  else if constexpr (std::is_bounded_array_v<T>)
    return compliant_v<std::remove_extent_t<T>>();
  else if constexpr (is_std_array<T>::value)
    return std::tuple_size_v<T> > 0 && compliant_v<typename T::value_type>();
  else if constexpr (is_pair<T>::value)
    return compliant_v<typename T::first_type>() && compliant_v<typename T::second_type>();
  else if constexpr (is_tuple<T>::value)
    return std::tuple_size_v<T> > 0 && all_fields_compliant<T>();
  else if constexpr (is_reflectable_aggregate<T>())
    return all_fields_compliant<field_tuple_t<T>>();
  else
    return false;
}

}  // namespace detail

template <class T>
concept compliant = detail::compliant_v<T>();

/// Calls `visit(address, kind)` for every primitive leaf of `value`, in
/// declaration order.
template <compliant T, class Visitor>
void visit_leaves(const T& value, Visitor&& visit) {
  using U = std::remove_cv_t<T>;
  if constexpr (detail::has_primitive_kind<U>()) {
    visit(static_cast<const void*>(std::addressof(value)), detail::kind_of<U>());
  } else if constexpr (std::is_bounded_array_v<U> || detail::is_std_array<U>::value) {
    for (const auto& element : value) visit_leaves(element, visit);
  } else if constexpr (detail::is_pair<U>::value) {
    visit_leaves(value.first, visit);
    visit_leaves(value.second, visit);
  } else if constexpr (detail::is_tuple<U>::value) {
    std::apply([&](const auto&... fields) { (visit_leaves(fields, visit), ...); }, value);
  } else {
    std::apply([&](const auto&... fields) { (visit_leaves(fields, visit), ...); },
               detail::tie_fields(value));
  }
}

namespace detail {

template <class T>
const T& reflection_sample() {
  static const auto sample = std::make_unique<T>();
  return *sample;
}

template <class T>
std::ptrdiff_t offset_within(const T& owner, const void* field) {
  return static_cast<const std::byte*>(field) - reinterpret_cast<const std::byte*>(&owner);
}

}  // namespace detail

/// Descriptor of a compliant type. Tuple elements appear in storage order,
/// which for some standard libraries is the reverse of declaration order.
template <compliant T>
type_descriptor descriptor_of() {
  using U = std::remove_cv_t<T>;
  if constexpr (detail::has_primitive_kind<U>()) {
    return type_descriptor::of(detail::kind_of<U>());
  } else if constexpr (std::is_bounded_array_v<U>) {
    return type_descriptor::fixed_array(std::extent_v<U>, descriptor_of<std::remove_extent_t<U>>());
  } else if constexpr (detail::is_std_array<U>::value) {
    return type_descriptor::fixed_array(std::tuple_size_v<U>, descriptor_of<typename U::value_type>());
  } else if constexpr (detail::is_pair<U>::value) {
    return type_descriptor::make_product(
        {descriptor_of<typename U::first_type>(), descriptor_of<typename U::second_type>()});
  } else if constexpr (detail::is_tuple<U>::value) {
    const U& sample = detail::reflection_sample<U>();
    std::vector<std::pair<std::ptrdiff_t, type_descriptor>> fields;
    [&]<std::size_t... I>(std::index_sequence<I...>) {
      (fields.emplace_back(detail::offset_within(sample, std::addressof(std::get<I>(sample))),
                           descriptor_of<std::tuple_element_t<I, U>>()),
       ...);
    }(std::make_index_sequence<std::tuple_size_v<U>>{});
    std::stable_sort(fields.begin(), fields.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<type_descriptor> ordered;
    for (auto& f : fields) ordered.push_back(std::move(f.second));
    return type_descriptor::make_product(std::move(ordered));
  } else {
    using fields_t = detail::field_tuple_t<U>;
    return [&]<std::size_t... I>(std::index_sequence<I...>) {
      return type_descriptor::make_product(
          {descriptor_of<std::remove_cvref_t<std::tuple_element_t<I, fields_t>>>()...});
    }(std::make_index_sequence<std::tuple_size_v<fields_t>>{});
  }
}

/// Typemap of a compliant type, observed from the native object layout.
/// Computed once per type and shared.
template <compliant T>
const typemap& typemap_of() {
  static const typemap map = [] {
    using U = std::remove_cv_t<T>;
    const U& sample = detail::reflection_sample<U>();
    std::vector<typemap_entry> entries;
    visit_leaves(sample, [&](const void* address, primitive_kind kind) {
      entries.push_back({static_cast<std::size_t>(detail::offset_within(sample, address)), kind});
    });
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.offset < b.offset; });
    return typemap{std::move(entries), sizeof(U), alignof(U)};
  }();
  return map;
}

}  // namespace mpi
