#include <gtest/gtest.h>

#include <set>

#include "qaexpert/fetch.hpp"
#include "support.hpp"

namespace corpus = qaexpert::corpus;
using qaexpert::testing::TempDir;

namespace {

// Serves a fixed listing in order; `after` names the last item already seen.
class ListingTransport final : public corpus::Transport {
 public:
  explicit ListingTransport(std::size_t n, int failures_before_success = 0)
      : failures_left_(failures_before_success) {
    for (std::size_t i = 0; i < n; ++i) ids_.push_back("t1_" + std::to_string(1000 + i));
  }

  corpus::Page fetch(const std::string& after, std::size_t limit) override {
    ++calls;
    if (failures_left_ > 0) {
      --failures_left_;
      throw corpus::TransportError("connection reset");
    }
    std::size_t start = 0;
    if (!after.empty()) {
      while (start < ids_.size() && ids_[start] != after) ++start;
      ++start;
    }
    corpus::Page page;
    for (std::size_t i = start; i < ids_.size() && page.items.size() < limit; ++i) {
      page.items.push_back({ids_[i], {{"id", ids_[i].substr(3)}}});
    }
    if (!page.items.empty()) page.after = page.items.back().fullname;
    return page;
  }

  int calls = 0;

 private:
  std::vector<std::string> ids_;
  int failures_left_;
};

}  // namespace

TEST(RateLimiter, SlidingWindow) {
  corpus::RateLimiter limiter(2, 10.0);
  EXPECT_EQ(limiter.earliest_emission(0.0), 0.0);
  limiter.record(0.0);
  limiter.record(1.0);
  EXPECT_DOUBLE_EQ(limiter.earliest_emission(1.0), 10.0);
  limiter.record(10.0);
  EXPECT_DOUBLE_EQ(limiter.earliest_emission(10.0), 11.0);
}

TEST(Fetch, BurstIsSpreadOverWindows) {
  TempDir dir;
  ListingTransport transport(120);
  corpus::VirtualClock clock(0.0);
  std::vector<double> times;
  corpus::FetchConfig config;
  config.checkpoint = dir / "ckpt";
  const auto r = corpus::fetch_remote(config, transport, clock, [&](const corpus::FetchedItem&) {
    times.push_back(clock.now());
    return true;
  });
  ASSERT_EQ(r.emitted, 120u);
  ASSERT_EQ(times.size(), 120u);
  for (std::size_t i = 60; i < 120; ++i) EXPECT_GE(times[i] - times[0], 60.0);
  // No window of 60 s ever holds more than 60 emissions.
  for (std::size_t i = 60; i < times.size(); ++i) EXPECT_GE(times[i] - times[i - 60], 60.0);
}

TEST(Fetch, ResumeAfterInterruptHasNoDuplicates) {
  TempDir dir;
  ListingTransport transport(150);
  corpus::VirtualClock clock;
  corpus::FetchConfig config;
  config.checkpoint = dir / "ckpt";
  std::vector<std::string> seen;
  auto first = corpus::fetch_remote(config, transport, clock, [&](const corpus::FetchedItem& item) {
    seen.push_back(item.fullname);
    return seen.size() < 47;
  });
  EXPECT_TRUE(first.interrupted);
  EXPECT_EQ(corpus::read_checkpoint(config.checkpoint), "t1_1046");
  auto second = corpus::fetch_remote(config, transport, clock, [&](const corpus::FetchedItem& item) {
    seen.push_back(item.fullname);
    return true;
  });
  EXPECT_FALSE(second.interrupted);
  EXPECT_EQ(seen.size(), 150u);
  EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), 150u);
}

TEST(Fetch, RetriesWithExponentialBackoff) {
  ListingTransport transport(3, 3);
  corpus::VirtualClock clock;
  corpus::FetchConfig config;
  std::size_t n = 0;
  const auto r = corpus::fetch_remote(config, transport, clock, [&](const corpus::FetchedItem&) {
    ++n;
    return true;
  });
  EXPECT_EQ(n, 3u);
  EXPECT_EQ(r.failed_attempts, 3);
  EXPECT_FALSE(r.stopped_on_error);
  EXPECT_DOUBLE_EQ(clock.now(), 1.0 + 2.0 + 4.0);
}

TEST(Fetch, GivesUpAfterMaxAttempts) {
  TempDir dir;
  ListingTransport transport(3, 100);
  corpus::VirtualClock clock;
  corpus::FetchConfig config;
  config.checkpoint = dir / "ckpt";
  const auto r = corpus::fetch_remote(config, transport, clock, [](const corpus::FetchedItem&) { return true; });
  EXPECT_TRUE(r.stopped_on_error);
  EXPECT_EQ(r.failed_attempts, config.max_attempts);
  EXPECT_EQ(r.emitted, 0u);
  EXPECT_FALSE(corpus::read_checkpoint(config.checkpoint).has_value());
}

TEST(Fetch, MaxItemsStopsEarly) {
  ListingTransport transport(100);
  corpus::VirtualClock clock;
  corpus::FetchConfig config;
  config.max_items = 25;
  const auto r = corpus::fetch_remote(config, transport, clock, [](const corpus::FetchedItem&) { return true; });
  EXPECT_EQ(r.emitted, 25u);
  EXPECT_EQ(r.last_seen, "t1_1024");
}
