#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <typeinfo>
#include <utility>

namespace mpi {

/// A reduction closure with its algebraic properties. The closure must be
/// associative; commutativity lets collectives reorder contributions.
template <class T>
struct reduce_op {
  std::function<T(const T&, const T&)> closure;
  bool commutative = false;
  std::optional<T> identity;

  T operator()(const T& a, const T& b) const { return closure(a, b); }
};

namespace ops {

struct sum {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return static_cast<T>(a + b); }
};
struct product {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return static_cast<T>(a * b); }
};
struct min {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return std::min(a, b); }
};
struct max {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return std::max(a, b); }
};
struct logical_and {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return static_cast<T>(a && b); }
};
struct logical_or {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return static_cast<T>(a || b); }
};
struct bitwise_and {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return static_cast<T>(a & b); }
};
struct bitwise_or {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return static_cast<T>(a | b); }
};
struct bitwise_xor {
  static constexpr bool commutative = true;
  template <class T>
  constexpr T operator()(const T& a, const T& b) const { return static_cast<T>(a ^ b); }
};

}  // namespace ops

/// Plain callables are treated as non-commutative.
template <class Op>
bool is_commutative(const Op& op) {
  if constexpr (requires { static_cast<bool>(op.commutative); }) return op.commutative;
  else return false;
}

/// Identifies an operator for the cross-rank argument check.
template <class Op>
std::uint64_t operator_id(const Op& op) {
  if constexpr (requires { op.closure.target_type(); }) return op.closure.target_type().hash_code();
  else if constexpr (requires { op.target_type(); }) return op.target_type().hash_code();
  else return typeid(Op).hash_code();
}

}  // namespace mpi
