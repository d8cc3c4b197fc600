#pragma once

#include "mpi/buffer.hpp"
#include "mpi/collectives.hpp"
#include "mpi/communicator.hpp"
#include "mpi/compliant.hpp"
#include "mpi/error.hpp"
#include "mpi/fabric.hpp"
#include "mpi/future.hpp"
#include "mpi/reduce_op.hpp"
#include "mpi/request.hpp"
#include "mpi/status.hpp"
#include "mpi/typemap.hpp"
