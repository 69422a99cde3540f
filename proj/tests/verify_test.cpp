#include <gtest/gtest.h>

#include "spolab/verify.hpp"

using namespace spolab::verify;

TEST(Suites, AllPass) {
  for (const auto& r : run_suites()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail << " max " << r.max_error;
}

TEST(Suites, FilterSelectsByName) {
  const auto r = run_suites("epsilon_aligned");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].name, "epsilon_aligned");
  EXPECT_TRUE(run_suites("no_such_suite").empty());
}

TEST(Suites, Deterministic) {
  const auto a = run_suites("gradient"), b = run_suites("gradient");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].max_error, b[i].max_error);
    EXPECT_EQ(a[i].cases, b[i].cases);
  }
}

TEST(Suites, PpoFailsAlignmentOnEveryPair) {
  const auto r = epsilon_alignment(50, 1e-4, 1e-4);
  EXPECT_EQ(r.detail, "f_ppo failed alignment on 50/50 pairs");
}
