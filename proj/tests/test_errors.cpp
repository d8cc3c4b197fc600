#include <gtest/gtest.h>

#include <random>

#include "future_checks.hpp"
#include "mpi/error.hpp"

namespace {

const mpi::error_code all_defaults[] = {
    mpi::error::invalid_rank,     mpi::error::invalid_source,
    mpi::error::invalid_root,     mpi::error::invalid_tag,
    mpi::error::invalid_argument, mpi::error::collective_mismatch,
    mpi::error::truncation,       mpi::error::non_compliant_type,
    mpi::error::use_after_free,   mpi::error::use_of_completed_request,
    mpi::error::start_on_active,  mpi::error::start_on_immediate,
    mpi::error::inactive_request, mpi::error::length_mismatch,
    mpi::error::internal,         mpi::error::peer_failed,
    mpi::error::consumed_future,  mpi::error::empty_set,
    mpi::error::deadlock_suspected,
};

TEST(ErrorCode, SuccessIffDetailZero) {
  EXPECT_TRUE(mpi::error::success.ok());
  EXPECT_EQ(mpi::error::success.detail(), 0);
  for (const auto& e : all_defaults) {
    EXPECT_FALSE(e.ok()) << e.render();
    EXPECT_NE(e.detail(), 0) << e.render();
  }
}

TEST(ErrorCode, StableClassValues) {
  EXPECT_EQ(static_cast<int>(mpi::error_class::success), 0);
  EXPECT_EQ(static_cast<int>(mpi::error_class::invalid_rank), 1);
  EXPECT_EQ(static_cast<int>(mpi::error_class::truncation), 4);
  EXPECT_EQ(static_cast<int>(mpi::error_class::internal), 11);
  EXPECT_EQ(static_cast<int>(mpi::error_class::consumed_future), 64);
  EXPECT_EQ(static_cast<int>(mpi::error_class::deadlock_suspected), 66);
  EXPECT_TRUE(mpi::is_extension(mpi::error_class::empty_set));
  EXPECT_FALSE(mpi::is_extension(mpi::error_class::length_mismatch));
}

TEST(ErrorCode, ClassNamesRoundTrip) {
  for (const auto& e : all_defaults) {
    const auto name = mpi::to_string(e.cls());
    ASSERT_EQ(mpi::parse_error_class(name), e.cls()) << name;
  }
  EXPECT_FALSE(mpi::parse_error_class("no_such_class").has_value());
}

TEST(ErrorCode, RenderRoundTripKeepsClassAndDetail) {
  for (const auto& e : all_defaults) {
    const auto parsed = mpi::error_code::parse(e.render());
    ASSERT_TRUE(parsed.has_value()) << e.render();
    EXPECT_EQ(*parsed, e);
    EXPECT_EQ(parsed->message(), e.message());
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto cls = static_cast<mpi::error_class>(1 + rng() % 11);
    const auto detail = static_cast<std::int32_t>(1 + rng() % 1000);
    const mpi::error_code code(cls, detail, "colon: inside " + std::to_string(i));
    const auto parsed = mpi::error_code::parse(code.render());
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(*parsed, code);
    EXPECT_EQ(parsed->message(), code.message());
  }
  EXPECT_FALSE(mpi::error_code::parse("garbage").has_value());
}

TEST(ErrorCode, DistinctDetailsShareClass) {
  EXPECT_EQ(mpi::class_of(mpi::error::invalid_rank), mpi::class_of(mpi::error::invalid_root));
  EXPECT_FALSE(mpi::error::invalid_rank == mpi::error::invalid_root);
  EXPECT_EQ(mpi::class_of(mpi::error::truncation), mpi::error_class::truncation);
}

TEST(Check, SuccessPassesThrough) {
  mpi::clear_last_error();
  EXPECT_NO_THROW(mpi::check(mpi::error::success));
  EXPECT_TRUE(mpi::check(mpi::error::success, mpi::error_policy::return_code).ok());
  EXPECT_TRUE(mpi::last_error().ok());
}

TEST(Check, RaiseThrowsTheCode) {
  try {
    mpi::check(mpi::error::truncation);
    FAIL() << "no exception";
  } catch (const mpi::exception& e) {
    EXPECT_EQ(e.code(), mpi::error::truncation);
    EXPECT_EQ(mpi::class_of(e.code()), mpi::error_class::truncation);
  }
}

TEST(Check, ReturnRecordsLastError) {
  mpi::clear_last_error();
  const auto code = mpi::check(mpi::error::empty_set, mpi::error_policy::return_code);
  EXPECT_EQ(code, mpi::error::empty_set);
  EXPECT_EQ(mpi::last_error(), mpi::error::empty_set);
  mpi::clear_last_error();
  EXPECT_TRUE(mpi::last_error().ok());
}

TEST(Policy, RaiseAndReturnAgreeOnMisuse) {
  const auto raised = checks::run_misuse_scripts(mpi::error_policy::raise);
  const auto returned = checks::run_misuse_scripts(mpi::error_policy::return_code);
  ASSERT_EQ(raised.size(), returned.size());
  const mpi::error_class expected[] = {
      mpi::error_class::invalid_rank,     mpi::error_class::invalid_rank,
      mpi::error_class::invalid_rank,     mpi::error_class::truncation,
      mpi::error_class::consumed_future,  mpi::error_class::start_on_active,
      mpi::error_class::use_of_completed_request, mpi::error_class::inactive_request,
  };
  ASSERT_EQ(raised.size(), std::size(expected));
  for (std::size_t i = 0; i < raised.size(); ++i) {
    SCOPED_TRACE(raised[i].name);
    EXPECT_EQ(raised[i].name, returned[i].name);
    EXPECT_EQ(raised[i].code.cls(), expected[i]);
    EXPECT_EQ(raised[i].code, returned[i].code);
    EXPECT_TRUE(returned[i].recorded);
  }
}

}  // namespace
