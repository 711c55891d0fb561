#include "qaexpert/fetch.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "qaexpert/error.hpp"
#include "qaexpert/io_util.hpp"

namespace qaexpert::corpus {

double SystemClock::now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_until(double t) {
  const double wait = t - now();
  if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
}

RateLimiter::RateLimiter(std::size_t max_items, double window_seconds)
    : max_items_(max_items), window_(window_seconds) {
  require(max_items > 0 && window_seconds > 0, ErrorCode::kInvalidArgument, "invalid rate limit");
}

double RateLimiter::earliest_emission(double now) const {
  if (recent_.size() < max_items_) return now;
  return std::max(now, recent_.front() + window_);
}

void RateLimiter::record(double t) {
  recent_.push_back(t);
  while (recent_.size() > max_items_) recent_.pop_front();
}

HttpTransport::HttpTransport(std::string base_url, std::string subreddit, std::string listing)
    : base_url_(std::move(base_url)), subreddit_(std::move(subreddit)), listing_(std::move(listing)) {}

Page HttpTransport::fetch(const std::string& after, std::size_t limit) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  std::string path = "/r/" + subreddit_ + "/" + listing_ + ".json?limit=" + std::to_string(limit);
  if (!after.empty()) path += "&after=" + after;
  auto response = client.Get(path);
  if (!response) throw TransportError("request failed: " + httplib::to_string(response.error()));
  if (response->status != 200) {
    throw TransportError("HTTP " + std::to_string(response->status) + " from " + path);
  }
  nlohmann::json body = nlohmann::json::parse(response->body, nullptr, false);
  if (body.is_discarded() || !body.contains("data")) throw TransportError("malformed listing");
  Page page;
  for (const auto& child : body["data"].value("children", nlohmann::json::array())) {
    const auto& data = child.at("data");
    std::string fullname = data.value("name", "");
    if (fullname.empty()) fullname = child.value("kind", "t1") + "_" + data.value("id", "");
    page.items.push_back(FetchedItem{fullname, data});
  }
  if (body["data"].contains("after") && body["data"]["after"].is_string()) {
    page.after = body["data"]["after"].get<std::string>();
  }
  return page;
}

std::optional<std::string> read_checkpoint(const std::filesystem::path& path) {
  if (path.empty() || !std::filesystem::exists(path)) return std::nullopt;
  auto text = std::string(io::trim(io::read_text_file(path)));
  if (text.empty()) return std::nullopt;
  return text;
}

FetchResult fetch_remote(const FetchConfig& config, Transport& transport, Clock& clock,
                         const ItemSink& sink) {
  FetchResult result;
  RateLimiter limiter(config.max_items_per_window, config.window_seconds);
  std::string cursor = read_checkpoint(config.checkpoint).value_or("");
  result.last_seen = cursor;

  while (true) {
    Page page;
    int attempt = 0;
    while (true) {
      try {
        page = transport.fetch(cursor, config.page_limit);
        break;
      } catch (const TransportError&) {
        ++attempt;
        ++result.failed_attempts;
        if (attempt >= config.max_attempts) {
          result.stopped_on_error = true;
          return result;  // checkpoint already holds the last emitted id
        }
        clock.sleep_until(clock.now() + config.initial_backoff_seconds * std::pow(2.0, attempt - 1));
      }
    }
    if (page.items.empty()) return result;

    for (const auto& item : page.items) {
      clock.sleep_until(limiter.earliest_emission(clock.now()));
      limiter.record(clock.now());
      const bool keep_going = sink(item);
      ++result.emitted;
      result.last_seen = item.fullname;
      cursor = item.fullname;
      if (!config.checkpoint.empty()) io::write_text_file(config.checkpoint, item.fullname + "\n");
      if (!keep_going) {
        result.interrupted = true;
        return result;
      }
      if (config.max_items && result.emitted >= *config.max_items) return result;
    }
  }
}

}  // namespace qaexpert::corpus
