#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "qaexpert/corpus.hpp"
#include "qaexpert/labels.hpp"

namespace qaexpert::fixture {

struct FixtureConfig {
  std::uint64_t seed = 42;
  std::size_t n_posts = 100;
  std::size_t n_comments = 1500;  // must be >= n_posts
  std::size_t n_labelled = 0;     // comments drawn with sample_for_labeling
  std::size_t n_users = 0;        // 0 picks about one user per 12 comments
  io::YearMonth from{2020, 5};
  io::YearMonth to{2021, 4};
  std::string subreddit = "datascience";
};

// A synthetic subreddit with three planted comment populations. Expert
// comments are long, multi-sentence and dense in data-science and
// programming vocabulary; non-expert comments are short opinions; out-of-
// scope comments are one-liners (thanks, jokes, links). Each user leans
// towards one class so user-level typing has something to find.
struct Fixture {
  corpus::CorpusStore store;
  std::unordered_map<std::string, Label> planted;  // class of every comment
  std::unordered_map<std::string, Label> user_type;  // dominant class per generated user
  std::vector<std::string> labelled_ids;  // sample order
};

// Byte-for-byte deterministic for a given config.
Fixture generate_fixture(const FixtureConfig& config);

}  // namespace qaexpert::fixture
