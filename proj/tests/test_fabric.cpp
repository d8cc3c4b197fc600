#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "matching_checks.hpp"
#include "mpi/fabric.hpp"

namespace {

std::vector<std::byte> bytes(std::initializer_list<int> values) {
  std::vector<std::byte> out;
  for (int v : values) out.push_back(static_cast<std::byte>(v));
  return out;
}

mpi::fabric_config sized(int ranks) {
  mpi::fabric_config config;
  config.world_size = ranks;
  return config;
}

mpi::envelope to(int source, int dest, int tag, std::size_t length = 0) {
  return {source, dest, tag, 0, length};
}

TEST(Fabric, MatchesPatterns) {
  const mpi::envelope m{1, 0, 5, 2, 0};
  EXPECT_TRUE(mpi::matches({mpi::any_source, 0, mpi::any_tag, 2, 0}, m));
  EXPECT_TRUE(mpi::matches({1, 0, 5, 2, 0}, m));
  EXPECT_FALSE(mpi::matches({1, 0, 5, 3, 0}, m));
  EXPECT_FALSE(mpi::matches({2, 0, mpi::any_tag, 2, 0}, m));
  EXPECT_FALSE(mpi::matches({mpi::any_source, 0, 4, 2, 0}, m));
}

TEST(Fabric, EagerSendThenReceive) {
  mpi::fabric f(sized(2));
  auto s = f.post_send(to(0, 1, 3, 2), bytes({7, 8}));
  EXPECT_TRUE(s->done());
  EXPECT_FALSE(s->failed());
  auto r = f.post_recv(to(mpi::any_source, 1, mpi::any_tag), 16);
  ASSERT_TRUE(r->done());
  EXPECT_EQ(r->matched().source, 0);
  EXPECT_EQ(r->matched().tag, 3);
  EXPECT_EQ(r->payload(), bytes({7, 8}));
  const auto stats = f.stats();
  EXPECT_EQ(stats.sent, 1u);
  EXPECT_EQ(stats.consumed, 1u);
  EXPECT_EQ(stats.unexpected_pending, 0u);
}

TEST(Fabric, PostedReceiveMatchesLaterSend) {
  mpi::fabric f(sized(2));
  auto r = f.post_recv(to(0, 1, 4), 16);
  EXPECT_FALSE(r->done());
  EXPECT_EQ(f.stats().receives_pending, 1u);
  f.post_send(to(0, 1, 9, 1), bytes({1}));
  EXPECT_FALSE(r->done());
  f.post_send(to(0, 1, 4, 1), bytes({2}));
  ASSERT_TRUE(r->done());
  EXPECT_EQ(r->payload(), bytes({2}));
}

TEST(Fabric, ContextsIsolateTraffic) {
  mpi::fabric f(sized(1));
  f.post_send({0, 0, 1, 7, 1}, bytes({1}));
  EXPECT_FALSE(f.probe({0, 0, 1, 8, 0}, false).has_value());
  EXPECT_TRUE(f.probe({0, 0, 1, 7, 0}, false).has_value());
}

TEST(Fabric, TruncationConsumesTheMessage) {
  mpi::fabric f(sized(1));
  f.post_send(to(0, 0, 0, 3), bytes({1, 2, 3}));
  auto r = f.post_recv(to(0, 0, 0), 2);
  ASSERT_TRUE(r->failed());
  EXPECT_EQ(r->error(), mpi::error::truncation);
  EXPECT_EQ(r->matched().length, 3u);
  EXPECT_FALSE(f.probe(to(0, 0, mpi::any_tag), false).has_value());
}

TEST(Fabric, InvalidEnvelopesFail) {
  mpi::fabric f(sized(2));
  EXPECT_EQ(f.post_send(to(0, 2, 0, 0), {})->error(), mpi::error::invalid_rank);
  EXPECT_EQ(f.post_send(to(-3, 1, 0, 0), {})->error(), mpi::error::invalid_source);
  EXPECT_EQ(f.post_send(to(0, 1, -2, 0), {})->error(), mpi::error::invalid_tag);
  EXPECT_EQ(f.post_send(to(0, 1, 0, 5), bytes({1}))->error(), mpi::error::length_mismatch);
}

TEST(Fabric, TraceSeesEveryEvent) {
  std::mutex m;
  std::vector<mpi::trace_event> seen;
  auto config = sized(1);
  config.trace = [&](mpi::trace_event e, const mpi::envelope&) {
    std::lock_guard lock(m);
    seen.push_back(e);
  };
  mpi::fabric f(config);
  f.post_send(to(0, 0, 0, 1), bytes({1}));
  f.probe(to(0, 0, 0), false);
  f.post_recv(to(0, 0, 0), 1);
  f.post_send(to(0, 0, 0, 2), bytes({1, 2}));
  f.post_recv(to(0, 0, 0), 1);
  using E = mpi::trace_event;
  EXPECT_EQ(seen, (std::vector<E>{E::send_posted, E::probed, E::recv_posted, E::matched,
                                  E::send_posted, E::recv_posted, E::truncated}));
}

TEST(Fabric, ContextRegistryCountsHandles) {
  mpi::fabric f(sized(1));
  const int a = f.allocate_context();
  const int b = f.allocate_context();
  EXPECT_NE(a, b);
  f.acquire_context(a);
  f.acquire_context(a);
  EXPECT_EQ(f.live_handles(a), 2);
  f.release_context(a);
  EXPECT_EQ(f.live_handles(a), 1);
  EXPECT_EQ(f.acquisitions(), 2u);
  EXPECT_EQ(f.releases(), 1u);
}

TEST(Fabric, WaitBlocksUntilPeerSends) {
  mpi::fabric f(sized(2));
  std::atomic<bool> sent{false};
  f.run_ranks([&](mpi::endpoint ep) {
    if (ep.rank() == 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      sent = true;
      f.post_send(to(0, 1, 0, 1), bytes({9}));
    } else {
      auto r = f.post_recv(to(0, 1, 0), 1);
      mpi::token* t = r.get();
      f.wait_all(1, std::span<mpi::token* const>(&t, 1));
      EXPECT_TRUE(sent.load());
      EXPECT_EQ(r->payload(), bytes({9}));
    }
  });
}

TEST(Fabric, WatchdogReportsDeadlock) {
  auto config = sized(2);
  config.watchdog_timeout = std::chrono::milliseconds(50);
  const auto results = mpi::spawn_world(config, [](mpi::endpoint ep) {
    auto& f = ep.get_fabric();
    auto r = f.post_recv(to(1 - ep.rank(), ep.rank(), 0), 1);
    mpi::token* t = r.get();
    f.wait_any(ep.rank(), std::span<mpi::token* const>(&t, 1));
  });
  for (const auto& r : results) {
    EXPECT_FALSE(r.ok());
    EXPECT_TRUE(r.error == mpi::error::deadlock_suspected || r.error == mpi::error::peer_failed)
        << r.error.render();
  }
}

TEST(Fabric, FailureIsAttributedToItsRank) {
  const auto results = mpi::spawn_world(sized(3), [](mpi::endpoint ep) {
    auto& f = ep.get_fabric();
    if (ep.rank() == 1) throw mpi::exception(mpi::error::internal);
    auto r = f.post_recv(to(1, ep.rank(), 0), 1);
    mpi::token* t = r.get();
    f.wait_any(ep.rank(), std::span<mpi::token* const>(&t, 1));
  });
  EXPECT_EQ(results[1].error, mpi::error::internal);
  EXPECT_EQ(results[0].error, mpi::error::peer_failed);
  EXPECT_EQ(results[2].error, mpi::error::peer_failed);
  try {
    mpi::values_or_throw(results);
    FAIL() << "no exception";
  } catch (const mpi::exception& e) {
    EXPECT_EQ(e.code(), mpi::error::internal);
  }
}

class Matching : public ::testing::TestWithParam<int> {};

TEST_P(Matching, HoldsAcrossSeeds) {
  const int ranks = GetParam();
  int wildcards = 0;
  int truncations = 0;
  int probes = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto report = checks::check_matching(ranks, seed, 120);
    ASSERT_EQ(report.messages, 120);
    ASSERT_EQ(report.receives, 120);
    ASSERT_TRUE(report.violations.empty()) << report.violations.front();
    wildcards += report.wildcard_receives;
    truncations += report.truncations;
    probes += report.probes;
  }
  EXPECT_GT(wildcards, 0);
  EXPECT_GT(truncations, 0);
  EXPECT_GT(probes, 0);
}

INSTANTIATE_TEST_SUITE_P(Ranks, Matching, ::testing::Range(2, 9));

}  // namespace
