#pragma once

#include <cstddef>

#include "mpi/error.hpp"
#include "mpi/fabric.hpp"

namespace mpi {

/// Outcome of a completed or probed operation. `count` is in elements of the
/// buffer's element type.
struct status {
  int source = any_source;
  int tag = any_tag;
  error_code error;
  std::size_t count = 0;
};

}  // namespace mpi
