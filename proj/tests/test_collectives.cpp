#include <gtest/gtest.h>

#include <array>
#include <numeric>
#include <optional>
#include <tuple>

#include "collective_checks.hpp"
#include "mpi/mpi.hpp"

namespace {

constexpr std::array<std::size_t, 3> counts{1, 3, 17};

mpi::fabric_config world_of(int ranks) {
  mpi::fabric_config config;
  config.world_size = ranks;
  config.watchdog_timeout = std::chrono::milliseconds(5000);
  return config;
}

using oracle_case = std::tuple<int, mpi::collective_algorithm>;

class Oracle : public ::testing::TestWithParam<oracle_case> {};

TEST_P(Oracle, AgreesWithGatherComputeScatter) {
  const auto [ranks, algorithm] = GetParam();
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto report = checks::check_collectives(ranks, algorithm, seed, counts);
    EXPECT_GT(report.comparisons, 0);
    EXPECT_LE(report.worst_relative_error, 1e-12);
    ASSERT_TRUE(report.violations.empty()) << "seed " << seed << ": " << report.violations.front();
  }
}

INSTANTIATE_TEST_SUITE_P(
    RanksAndAlgorithms, Oracle,
    ::testing::Combine(::testing::Values(1, 2, 3, 4, 5, 8),
                       ::testing::Values(mpi::collective_algorithm::tree, mpi::collective_algorithm::linear)),
    [](const auto& info) {
      return "ranks" + std::to_string(std::get<0>(info.param)) +
             (std::get<1>(info.param) == mpi::collective_algorithm::tree ? "_tree" : "_linear");
    });

TEST(Collectives, ScansOnFourRanks) {
  const auto out = mpi::run_world(world_of(4), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    const int mine = comm.rank() + 1;
    int inclusive = 0;
    std::optional<int> exclusive;
    comm.scan(mine, inclusive, mpi::ops::sum{});
    comm.exclusive_scan(mine, exclusive, mpi::ops::sum{});
    return std::pair(inclusive, exclusive.value_or(-1));
  });
  EXPECT_EQ(out[0], std::pair(1, -1));
  EXPECT_EQ(out[1], std::pair(3, 1));
  EXPECT_EQ(out[2], std::pair(6, 3));
  EXPECT_EQ(out[3], std::pair(10, 6));
}

TEST(Collectives, GatherVectorsOnNonzeroRoot) {
  const auto out = mpi::run_world(world_of(3), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    const std::vector<int> mine{comm.rank(), comm.rank() * 10};
    std::vector<int> all;
    comm.gather(mine, all, 2);
    return all;
  });
  EXPECT_TRUE(out[0].empty());
  EXPECT_EQ(out[2], (std::vector<int>{0, 0, 1, 10, 2, 20}));
}

TEST(Collectives, InvalidRootIsReported) {
  mpi::fabric_config config = world_of(2);
  config.policy = mpi::error_policy::return_code;
  const auto codes = mpi::run_world(config, [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    int x = 0;
    return comm.broadcast(x, 2).error;
  });
  for (const auto& e : codes) EXPECT_EQ(e, mpi::error::invalid_root);
}

void expect_mismatch(const std::vector<mpi::rank_result<std::monostate>>& results) {
  int mismatches = 0;
  for (const auto& r : results) {
    if (r.error == mpi::error::collective_mismatch) ++mismatches;
    else EXPECT_TRUE(r.ok() || r.error == mpi::error::peer_failed) << r.error.render();
  }
  EXPECT_GT(mismatches, 0);
}

TEST(Collectives, DisagreeingOperationsAreDetected) {
  expect_mismatch(mpi::spawn_world(world_of(2), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    int x = 0, y = 0;
    if (comm.rank() == 0)
      comm.broadcast(x, 0);
    else
      comm.all_reduce(x, y, mpi::ops::sum{});
  }));
}

TEST(Collectives, DisagreeingOperatorsAreDetected) {
  expect_mismatch(mpi::spawn_world(world_of(3), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    int x = 1, y = 0;
    if (comm.rank() == 1)
      comm.all_reduce(x, y, mpi::ops::max{});
    else
      comm.all_reduce(x, y, mpi::ops::sum{});
  }));
}

TEST(Collectives, DisagreeingCountsAreDetected) {
  expect_mismatch(mpi::spawn_world(world_of(2), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    const std::vector<int> x(static_cast<std::size_t>(2 + comm.rank()), 1);
    std::vector<int> y;
    comm.all_reduce(x, y, mpi::ops::sum{});
  }));
}

TEST(Collectives, SubcommunicatorsRunIndependently) {
  const auto out = mpi::run_world(world_of(6), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    auto half = comm.split(comm.rank() / 3);
    int total = 0;
    auto r = half->immediate_all_reduce(comm.rank(), total, mpi::ops::sum{});
    comm.barrier();
    r.wait();
    return total;
  });
  EXPECT_EQ(out, (std::vector<int>{3, 3, 3, 12, 12, 12}));
}

}  // namespace
