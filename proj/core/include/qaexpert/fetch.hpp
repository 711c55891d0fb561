#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qaexpert::corpus {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;  // seconds
  virtual void sleep_until(double t) = 0;
};

class SystemClock final : public Clock {
 public:
  double now() override;
  void sleep_until(double t) override;
};

// Deterministic clock for tests: sleeping advances time instantly.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(double start = 0.0) : now_(start) {}
  double now() override { return now_; }
  void sleep_until(double t) override {
    if (t > now_) now_ = t;
  }
  void advance(double seconds) { now_ += seconds; }

 private:
  double now_;
};

// Sliding-window limiter: at most `max_items` emissions in any window of
// `window_seconds`.
class RateLimiter {
 public:
  RateLimiter(std::size_t max_items, double window_seconds);

  double earliest_emission(double now) const;
  void record(double t);

 private:
  std::size_t max_items_;
  double window_;
  std::deque<double> recent_;
};

struct FetchedItem {
  std::string fullname;  // e.g. "t1_abc"
  nlohmann::json data;   // Reddit object, same field names as dump lines
};

struct Page {
  std::vector<FetchedItem> items;
  std::optional<std::string> after;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A listing source that returns the items following `after` (empty = from
// the beginning). Throws TransportError on network failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Page fetch(const std::string& after, std::size_t limit) = 0;
};

// GET {base_url}/r/{subreddit}/{listing}.json?limit=N&after=FULLNAME, reading
// Reddit's listing envelope {"data": {"children": [{"kind", "data"}], "after"}}.
class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string base_url, std::string subreddit, std::string listing = "comments");
  Page fetch(const std::string& after, std::size_t limit) override;

 private:
  std::string base_url_;
  std::string subreddit_;
  std::string listing_;
};

struct FetchConfig {
  std::filesystem::path checkpoint;  // plain text, last-seen fullname
  std::size_t max_items_per_window = 60;
  double window_seconds = 60.0;
  std::size_t page_limit = 60;
  int max_attempts = 5;
  double initial_backoff_seconds = 1.0;
  std::optional<std::size_t> max_items;  // stop after this many emissions
};

struct FetchResult {
  std::size_t emitted = 0;
  std::string last_seen;
  int failed_attempts = 0;
  bool stopped_on_error = false;
  bool interrupted = false;  // the sink asked to stop
};

// Sink returns false to stop after the current item (which is checkpointed).
using ItemSink = std::function<bool(const FetchedItem&)>;

FetchResult fetch_remote(const FetchConfig& config, Transport& transport, Clock& clock,
                         const ItemSink& sink);

std::optional<std::string> read_checkpoint(const std::filesystem::path& path);

}  // namespace qaexpert::corpus
