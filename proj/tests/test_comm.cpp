#include <gtest/gtest.h>

#include <array>
#include <chrono>
#include <cstring>
#include <string>
#include <valarray>

#include "mpi/mpi.hpp"

namespace {

struct particle {
  std::uint64_t id;
  std::array<float, 3> position;
};

mpi::fabric_config world_of(int ranks, mpi::error_policy policy = mpi::error_policy::raise) {
  mpi::fabric_config config;
  config.world_size = ranks;
  config.policy = policy;
  config.watchdog_timeout = std::chrono::milliseconds(5000);
  return config;
}

TEST(PointToPoint, CustomTypeArrivesBitIdentical) {
  const particle sent{42, {1.0f, 2.0f, 3.0f}};
  const auto got = mpi::run_world(world_of(2), [&](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    particle custom{};
    if (comm.rank() == 0) {
      custom = sent;
      comm.send(custom, 1);
    }
    if (comm.rank() == 1) {
      const auto s = comm.receive(custom, 0);
      EXPECT_EQ(s.source, 0);
      EXPECT_EQ(s.tag, 0);
      EXPECT_EQ(s.count, 1u);
    }
    return custom;
  });
  EXPECT_EQ(got[1].id, sent.id);
  EXPECT_EQ(std::memcmp(got[1].position.data(), sent.position.data(), sizeof(sent.position)), 0);
}

TEST(PointToPoint, SendToSelfWithImmediateReceive) {
  mpi::run_world(world_of(1), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    std::vector<double> in{1.5, 2.5}, out;
    auto r = comm.immediate_receive(out, 0, 3);
    EXPECT_FALSE(r.test().has_value());
    comm.send(in, 0, 3);
    const auto s = r.wait();
    EXPECT_EQ(s.count, 2u);
    EXPECT_EQ(out, in);
  });
}

TEST(PointToPoint, WildcardReportsConcreteSource) {
  const auto sources = mpi::run_world(world_of(3), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    if (comm.rank() != 0) {
      comm.send(comm.rank(), 0, 10 + comm.rank());
      return std::vector<int>{};
    }
    std::vector<int> seen;
    for (int i = 0; i < 2; ++i) {
      int value = 0;
      const auto s = comm.receive(value);
      EXPECT_EQ(value, s.source);
      EXPECT_EQ(s.tag, 10 + s.source);
      seen.push_back(s.source);
    }
    std::sort(seen.begin(), seen.end());
    return seen;
  });
  EXPECT_EQ(sources[0], (std::vector<int>{1, 2}));
}

TEST(PointToPoint, ZeroLengthMessage) {
  mpi::run_world(world_of(1), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    const std::vector<int> none;
    std::vector<int> out{1, 2, 3};
    comm.send(none, 0);
    const auto s = comm.receive(out);
    EXPECT_EQ(s.count, 0u);
    EXPECT_TRUE(out.empty());
  });
}

TEST(PointToPoint, ContainerBuffers) {
  mpi::run_world(world_of(2), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    if (comm.rank() == 0) {
      comm.send(std::string("hello"), 1, 1);
      comm.send(std::valarray<int>{4, 5, 6}, 1, 2);
      std::array<particle, 2> pair{{{1, {1, 1, 1}}, {2, {2, 2, 2}}}};
      comm.send(std::span<const particle>(pair), 1, 3);
      return;
    }
    std::string text;
    comm.receive(text, 0, 1);
    EXPECT_EQ(text, "hello");
    std::valarray<int> v;
    comm.receive(v, 0, 2);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[2], 6);
    std::vector<particle> ps;
    comm.receive(ps, 0, 3);
    ASSERT_EQ(ps.size(), 2u);
    EXPECT_EQ(ps[1].id, 2u);
    EXPECT_EQ(ps[1].position[2], 2.0f);
  });
}

TEST(PointToPoint, ProbeReportsElementCount) {
  mpi::run_world(world_of(1), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    EXPECT_FALSE(comm.immediate_probe().has_value());
    comm.send(std::vector<std::int32_t>{1, 2, 3}, 0, 4);
    const auto p = comm.probe<std::int32_t>(0, 4);
    EXPECT_EQ(p.count, 3u);
    EXPECT_EQ(p.tag, 4);
    EXPECT_EQ(comm.immediate_probe<std::int16_t>()->count, 6u);
    std::vector<std::int32_t> out;
    comm.receive(out, 0, 4);
    EXPECT_FALSE(comm.immediate_probe().has_value());
  });
}

TEST(PointToPoint, InvalidArgumentsUnderBothPolicies) {
  for (auto policy : {mpi::error_policy::raise, mpi::error_policy::return_code}) {
    const auto codes = mpi::run_world(world_of(2, policy), [&](mpi::endpoint ep) {
      auto comm = mpi::world(ep);
      std::vector<mpi::error_code> out;
      auto attempt = [&](auto&& f) {
        try {
          out.push_back(f());
        } catch (const mpi::exception& e) {
          out.push_back(e.code());
        }
      };
      int x = 0;
      attempt([&] { return comm.send(x, 2).error; });
      attempt([&] { return comm.send(x, -1).error; });
      attempt([&] { return comm.send(x, 0, -4).error; });
      attempt([&] { return comm.receive(x, 7).error; });
      attempt([&] { return comm.receive(x, 0, -9).error; });
      attempt([&] { return comm.probe(3).error; });
      return out;
    });
    const std::vector<mpi::error_code> want = {mpi::error::invalid_rank, mpi::error::invalid_rank,
                                               mpi::error::invalid_tag, mpi::error::invalid_source,
                                               mpi::error::invalid_tag, mpi::error::invalid_source};
    EXPECT_EQ(codes[0], want);
  }
}

TEST(Persistent, CyclesThroughStart) {
  mpi::run_world(world_of(2), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    int value = 0;
    if (comm.rank() == 0) {
      auto send = comm.persistent_send(value, 1, 5);
      EXPECT_EQ(send.get_state(), mpi::request::state::inactive);
      for (int i = 1; i <= 3; ++i) {
        value = i * 10;
        EXPECT_TRUE(send.start().ok());
        send.wait();
        EXPECT_EQ(send.get_state(), mpi::request::state::inactive);
      }
      return;
    }
    auto recv = comm.persistent_receive(value, 0, 5);
    for (int i = 1; i <= 3; ++i) {
      recv.start();
      EXPECT_EQ(recv.get_state(), mpi::request::state::active);
      recv.wait();
      EXPECT_EQ(value, i * 10);
    }
  });
}

TEST(Persistent, MisuseCodes) {
  mpi::run_world(world_of(1, mpi::error_policy::return_code), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    int value = 1;
    auto r = comm.persistent_receive(value, 0, 1);
    EXPECT_EQ(r.wait().error, mpi::error::inactive_request);
    EXPECT_TRUE(r.start().ok());
    EXPECT_EQ(r.start(), mpi::error::start_on_active);
    comm.send(value, 0, 1);
    EXPECT_TRUE(r.wait().error.ok());

    auto once = comm.immediate_send(value, 0, 2);
    EXPECT_EQ(once.start(), mpi::error::start_on_immediate);
    EXPECT_TRUE(once.wait().error.ok());
    EXPECT_EQ(once.wait().error, mpi::error::use_of_completed_request);
    EXPECT_EQ(mpi::last_error(), mpi::error::use_of_completed_request);
    comm.receive(value, 0, 2);
  });
}

TEST(Requests, WaitAllAndWaitAny) {
  mpi::run_world(world_of(3), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    if (comm.rank() != 0) {
      comm.send(comm.rank() * 2, 0, comm.rank());
      return;
    }
    int a = 0, b = 0;
    std::vector<mpi::request> rs;
    rs.push_back(comm.immediate_receive(a, 1, 1));
    rs.push_back(comm.immediate_receive(b, 2, 2));
    const auto statuses = mpi::wait_all(rs);
    ASSERT_EQ(statuses.size(), 2u);
    EXPECT_EQ(statuses[0].source, 1);
    EXPECT_EQ(statuses[1].source, 2);
    EXPECT_EQ(a + b, 6);

    std::vector<mpi::request> none;
    try {
      mpi::wait_any(none);
      ADD_FAILURE() << "wait_any of nothing returned";
    } catch (const mpi::exception& e) {
      EXPECT_EQ(e.code(), mpi::error::empty_set);
    }
  });
}

TEST(Communicator, DuplicateIsolatesTraffic) {
  mpi::run_world(world_of(2), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    auto dup = comm.duplicate();
    EXPECT_NE(dup.context(), comm.context());
    EXPECT_EQ(dup.size(), 2);
    if (comm.rank() == 0) {
      comm.send(1, 1, 0);
      dup.send(2, 1, 0);
      return;
    }
    int x = 0;
    dup.receive(x, 0, 0);
    EXPECT_EQ(x, 2);
    comm.receive(x, 0, 0);
    EXPECT_EQ(x, 1);
  });
}

TEST(Communicator, SplitOrdersByKeyThenRank) {
  const auto out = mpi::run_world(world_of(5), [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    const int color = comm.rank() == 4 ? mpi::undefined : comm.rank() % 2;
    const auto sub = comm.split(color, -comm.rank());
    if (!sub) return std::vector<int>{-1};
    std::vector<int> members(sub->members().world_ranks().begin(), sub->members().world_ranks().end());
    int sum = 0;
    sub->all_reduce(comm.rank(), sum, mpi::ops::sum{});
    members.push_back(sub->rank());
    members.push_back(sum);
    return members;
  });
  EXPECT_EQ(out[0], (std::vector<int>{2, 0, 1, 2}));
  EXPECT_EQ(out[2], (std::vector<int>{2, 0, 0, 2}));
  EXPECT_EQ(out[1], (std::vector<int>{3, 1, 1, 4}));
  EXPECT_EQ(out[3], (std::vector<int>{3, 1, 0, 4}));
  EXPECT_EQ(out[4], (std::vector<int>{-1}));
}

TEST(Communicator, ManagedHandlesReleaseOnce) {
  mpi::fabric f(world_of(2));
  mpi::run_world(f, [](mpi::endpoint ep) {
    auto comm = mpi::world(ep);
    auto dup = comm.duplicate();
    const int context = dup.context();
    {
      mpi::communicator alias(dup.native_handle());
      EXPECT_FALSE(alias.managed());
      EXPECT_EQ(alias, dup);
    }
    EXPECT_EQ(ep.get_fabric().live_handles(context) > 0, true);
    dup.free();
    EXPECT_FALSE(dup.live());
    try {
      dup.send(1, 0);
      ADD_FAILURE() << "send on a freed communicator";
    } catch (const mpi::exception& e) {
      EXPECT_EQ(e.code(), mpi::error::use_after_free);
    }
  });
  EXPECT_EQ(f.live_handles(), 0);
  EXPECT_EQ(f.acquisitions(), f.releases());
}

TEST(Communicator, GroupRejectsDuplicates) {
  EXPECT_THROW(mpi::group({0, 1, 1}), mpi::exception);
  EXPECT_THROW(mpi::group(std::vector<int>{}), mpi::exception);
  const mpi::group g({3, 1});
  EXPECT_EQ(g.local_rank(1), 1);
  EXPECT_EQ(g.local_rank(0), -1);
}

}  // namespace
