#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "qaexpert/corpus.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/io_util.hpp"
#include "support.hpp"

namespace corpus = qaexpert::corpus;
namespace io = qaexpert::io;
using qaexpert::testing::TempDir;

namespace {

corpus::PostRecord post(std::string id, std::string author, std::int64_t t, std::int64_t score = 1) {
  corpus::PostRecord p;
  p.id = std::move(id);
  p.author = std::move(author);
  p.title = "title " + p.id;
  p.body = "body";
  p.created_utc = t;
  p.score = score;
  p.upvote_ratio = 0.9;
  p.subreddit = "datascience";
  return p;
}

corpus::CommentRecord top_comment(std::string id, const std::string& post_id, std::string author, std::int64_t t,
                                  std::string body = "a reply") {
  corpus::CommentRecord c;
  c.id = std::move(id);
  c.post_id = post_id;
  c.parent_id = post_id;
  c.author = std::move(author);
  c.body = std::move(body);
  c.created_utc = t;
  c.is_top_level = true;
  return c;
}

corpus::CommentRecord reply(std::string id, const std::string& post_id, const std::string& parent, std::string author,
                            std::int64_t t) {
  auto c = top_comment(std::move(id), post_id, std::move(author), t);
  c.parent_id = parent;
  c.is_top_level = false;
  return c;
}

// 12 months with 10 posts each, every post carrying 10 top-level comments.
corpus::CorpusStore monthly_store() {
  std::vector<corpus::PostRecord> posts;
  std::vector<corpus::CommentRecord> comments;
  io::YearMonth ym{2020, 5};
  for (int m = 0; m < 12; ++m, ym = ym.next()) {
    const std::int64_t base = io::epoch_seconds(ym.year, ym.month, 2);
    for (int p = 0; p < 10; ++p) {
      const std::string pid = "p" + std::to_string(m) + "_" + std::to_string(p);
      posts.push_back(post(pid, "op" + std::to_string(p), base + p * 3600));
      for (int c = 0; c < 10; ++c) {
        comments.push_back(top_comment(pid + "_c" + std::to_string(c), pid, "u" + std::to_string(c),
                                       base + p * 3600 + 60 * (c + 1)));
      }
    }
  }
  return corpus::CorpusStore::from_records(posts, comments);
}

}  // namespace

TEST(Fullname, PrefixStripped) {
  EXPECT_EQ(corpus::strip_fullname_prefix("t1_abc"), "abc");
  EXPECT_EQ(corpus::strip_fullname_prefix("t3_xyz"), "xyz");
  EXPECT_EQ(corpus::strip_fullname_prefix("abc"), "abc");
}

TEST(DeletedAuthor, RecognisesRemovedAccounts) {
  EXPECT_TRUE(corpus::is_deleted_author("[deleted]"));
  EXPECT_TRUE(corpus::is_deleted_author(""));
  EXPECT_FALSE(corpus::is_deleted_author("alice"));
}

TEST(DumpLines, PostRoundTrip) {
  auto p = post("abc", "alice", 1600000000, 7);
  p.total_awards = 2;
  const auto parsed = corpus::parse_post_line(corpus::format_post_line(p));
  ASSERT_TRUE(parsed.has_value());
  EXPECT_EQ(*parsed, p);
}

TEST(DumpLines, CommentRoundTrip) {
  const auto c = reply("c2", "p1", "c1", "bob", 1600000100);
  const auto parsed = corpus::parse_comment_line(corpus::format_comment_line(c));
  ASSERT_TRUE(parsed.has_value());
  EXPECT_EQ(*parsed, c);
  const auto t = top_comment("c1", "p1", "bob", 1600000050);
  EXPECT_EQ(*corpus::parse_comment_line(corpus::format_comment_line(t)), t);
}

TEST(DumpLines, MalformedLinesRejected) {
  EXPECT_FALSE(corpus::parse_post_line("not json").has_value());
  EXPECT_FALSE(corpus::parse_post_line("[1,2]").has_value());
  EXPECT_FALSE(corpus::parse_post_line(R"({"id":"a","author":"x","title":"t"})").has_value());
  EXPECT_FALSE(corpus::parse_comment_line(R"({"id":"c","author":"x","body":"b","created_utc":5})").has_value());
}

TEST(Store, DuplicatesDroppedFirstWins) {
  auto first = post("p1", "alice", 100);
  auto second = post("p1", "mallory", 200);
  auto store = corpus::CorpusStore::from_records({first, second}, {});
  ASSERT_EQ(store.posts().size(), 1u);
  EXPECT_EQ(store.posts()[0].author, "alice");
  EXPECT_EQ(store.report().duplicate_posts, 1u);
}

TEST(Store, DanglingReferencesQuarantined) {
  const auto p = post("p1", "alice", 100);
  std::vector<corpus::CommentRecord> comments = {
      top_comment("c1", "p1", "bob", 110), reply("c2", "p1", "c1", "carol", 120),
      top_comment("c3", "missing", "dave", 130), reply("c4", "p1", "ghost", "erin", 140)};
  auto store = corpus::CorpusStore::from_records({p}, comments);
  EXPECT_EQ(store.comments().size(), 2u);
  EXPECT_EQ(store.quarantined().size(), 2u);
  EXPECT_EQ(store.find_comment("c3"), nullptr);
  EXPECT_EQ(store.parent_created_utc(*store.find_comment("c2")), 110);
  EXPECT_EQ(store.parent_created_utc(*store.find_comment("c1")), 100);
}

TEST(Store, IndexesByAuthorAndPost) {
  const auto p = post("p1", "alice", 100);
  std::vector<corpus::CommentRecord> comments = {top_comment("c1", "p1", "bob", 110),
                                                  reply("c2", "p1", "c1", "alice", 120),
                                                  top_comment("c3", "p1", "[deleted]", 130)};
  auto store = corpus::CorpusStore::from_records({p}, comments);
  EXPECT_EQ(store.posts_by("alice").size(), 1u);
  EXPECT_EQ(store.comments_by("alice").size(), 1u);
  EXPECT_EQ(store.top_level_comments_of("p1").size(), 2u);
  EXPECT_EQ(store.authors(), (std::vector<std::string>{"alice", "bob"}));
}

TEST(Store, SaveLoadRoundTrip) {
  TempDir dir;
  auto store = monthly_store();
  store.save(dir / "store");
  const auto loaded = corpus::CorpusStore::load(dir / "store");
  EXPECT_EQ(loaded.posts(), store.posts());
  EXPECT_EQ(loaded.comments(), store.comments());
  EXPECT_EQ(loaded.authors(), store.authors());
}

TEST(Store, IngestCountsMalformedAndDuplicates) {
  TempDir dir;
  {
    std::ofstream posts(dir / "posts.jsonl");
    posts << corpus::format_post_line(post("p1", "alice", 100)) << "\n";
    posts << "{broken\n";
    posts << corpus::format_post_line(post("p1", "alice", 100)) << "\n";
    std::ofstream comments(dir / "comments.jsonl");
    comments << corpus::format_comment_line(top_comment("c1", "p1", "bob", 110)) << "\n";
    comments << corpus::format_comment_line(top_comment("c9", "nope", "bob", 110)) << "\n";
    comments << "\n";
  }
  const auto store = corpus::CorpusStore::ingest(dir / "posts.jsonl", dir / "comments.jsonl");
  EXPECT_EQ(store.posts().size(), 1u);
  EXPECT_EQ(store.comments().size(), 1u);
  EXPECT_EQ(store.report().malformed_posts, 1u);
  EXPECT_EQ(store.report().duplicate_posts, 1u);
  EXPECT_EQ(store.report().quarantined_comments, 1u);
}

TEST(Store, IngestMissingFileIsIoError) {
  TempDir dir;
  try {
    corpus::CorpusStore::ingest(dir / "none.jsonl", dir / "none2.jsonl");
    FAIL();
  } catch (const qaexpert::Error& e) {
    EXPECT_EQ(e.code(), qaexpert::ErrorCode::kIo);
  }
}

TEST(Metrics, CommentsPerSubmissionAndScore) {
  std::vector<corpus::PostRecord> posts;
  std::vector<corpus::CommentRecord> comments;
  for (int i = 0; i < 824; ++i) posts.push_back(post("p" + std::to_string(i), "a", 100 + i, i % 2 ? 3 : 5));
  for (int i = 0; i < 5400; ++i) {
    comments.push_back(top_comment("c" + std::to_string(i), "p" + std::to_string(i % 824), "b", 2000 + i));
  }
  const auto m = corpus::subreddit_metrics(corpus::CorpusStore::from_records(posts, comments));
  EXPECT_EQ(m.submission_count, 824u);
  EXPECT_EQ(m.comment_count, 5400u);
  EXPECT_NEAR(m.avg_comments_per_submission, 5400.0 / 824.0, 1e-12);
  EXPECT_NEAR(m.avg_comments_per_submission, 6.55, 0.005);
  EXPECT_DOUBLE_EQ(m.avg_score, 4.0);
}

TEST(Metrics, EmptyStoreReportsZero) {
  const auto m = corpus::subreddit_metrics(corpus::CorpusStore{});
  EXPECT_TRUE(m.empty);
  EXPECT_EQ(m.avg_comments_per_submission, 0.0);
}

TEST(Sample, EvenSpreadOverMonths) {
  const auto store = monthly_store();
  const auto r = corpus::sample_for_labeling(store, 1113, {{2020, 5}, {2021, 4}}, 42);
  ASSERT_EQ(r.per_month.size(), 12u);
  EXPECT_EQ(r.comment_ids.size(), 1113u);
  for (const auto& m : r.per_month) {
    EXPECT_TRUE(m.selected == 92 || m.selected == 93) << io::to_string(m.month) << " " << m.selected;
    EXPECT_EQ(m.available, 100u);
  }
  EXPECT_FALSE(r.imbalanced);
  std::set<std::string> unique(r.comment_ids.begin(), r.comment_ids.end());
  EXPECT_EQ(unique.size(), r.comment_ids.size());
}

TEST(Sample, DeterministicPerSeed) {
  const auto store = monthly_store();
  const auto a = corpus::sample_for_labeling(store, 200, {{2020, 5}, {2021, 4}}, 7);
  const auto b = corpus::sample_for_labeling(store, 200, {{2020, 5}, {2021, 4}}, 7);
  const auto c = corpus::sample_for_labeling(store, 200, {{2020, 5}, {2021, 4}}, 8);
  EXPECT_EQ(a.comment_ids, b.comment_ids);
  EXPECT_NE(a.comment_ids, c.comment_ids);
}

TEST(Sample, EligibilityBoundsAreInclusive) {
  const std::int64_t t = io::epoch_seconds(2020, 6, 3);
  std::vector<corpus::PostRecord> posts;
  std::vector<corpus::CommentRecord> comments;
  for (std::size_t k : {4u, 5u, 20u, 21u}) {
    const std::string pid = "p" + std::to_string(k);
    posts.push_back(post(pid, "op", t));
    for (std::size_t i = 0; i < k; ++i) {
      comments.push_back(top_comment(pid + "c" + std::to_string(i), pid, "u", t + 10 + static_cast<std::int64_t>(i)));
    }
  }
  const auto r = corpus::sample_for_labeling(corpus::CorpusStore::from_records(posts, comments), 1000,
                                             {{2020, 6}, {2020, 6}}, 1);
  EXPECT_EQ(r.eligible_posts, 2u);
  EXPECT_EQ(r.comment_ids.size(), 25u);
  for (const auto& id : r.comment_ids) EXPECT_TRUE(id.rfind("p5c", 0) == 0 || id.rfind("p20c", 0) == 0) << id;
}

TEST(Sample, ShortMonthFlagsImbalance) {
  auto store = monthly_store();
  std::vector<corpus::PostRecord> posts;
  std::vector<corpus::CommentRecord> comments;
  for (const auto& p : store.posts()) {
    if (io::utc_year_month(p.created_utc) == io::YearMonth{2020, 7} && p.id.back() != '0') continue;
    posts.push_back(p);
  }
  for (const auto& c : store.comments()) comments.push_back(c);
  const auto trimmed = corpus::CorpusStore::from_records(posts, comments);
  const auto r = corpus::sample_for_labeling(trimmed, 1113, {{2020, 5}, {2021, 4}}, 3);
  // Eleven full months plus the ten comments left in July.
  EXPECT_EQ(r.comment_ids.size(), 1110u);
  EXPECT_TRUE(r.imbalanced);
  EXPECT_FALSE(r.notes.empty());
}

TEST(Sample, RejectsBadArguments) {
  const auto store = monthly_store();
  EXPECT_THROW(corpus::sample_for_labeling(store, 0, {{2020, 5}, {2021, 4}}, 1), qaexpert::Error);
  EXPECT_THROW(corpus::sample_for_labeling(store, 5, {{2021, 5}, {2020, 4}}, 1), qaexpert::Error);
}

TEST(Calendar, YearMonthRoundTrip) {
  EXPECT_EQ(io::utc_year_month(io::epoch_seconds(2020, 12, 31) + 86399), (io::YearMonth{2020, 12}));
  EXPECT_EQ(io::utc_year_month(io::epoch_seconds(2021, 1, 1)), (io::YearMonth{2021, 1}));
  EXPECT_EQ(io::epoch_seconds(1970, 1, 1), 0);
  EXPECT_EQ(io::to_string(io::parse_year_month("2020-05")), "2020-05");
  EXPECT_EQ((io::YearMonth{2020, 12}.next()), (io::YearMonth{2021, 1}));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> t(0, 4102444800);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t s = t(rng);
    const auto ym = io::utc_year_month(s);
    EXPECT_LE(io::epoch_seconds(ym.year, ym.month, 1), s);
    const auto nx = ym.next();
    EXPECT_GT(io::epoch_seconds(nx.year, nx.month, 1), s);
  }
}

TEST(IoUtil, DoublesRoundTrip) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(0.0, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = d(rng);
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  }
}

TEST(IoUtil, TableRoundTrip) {
  io::Table t{{"a", "b"}, {{"1", "x"}, {"2", "y"}}};
  const auto parsed = io::parse_table(io::format_table(t));
  EXPECT_EQ(parsed.header, t.header);
  EXPECT_EQ(parsed.rows, t.rows);
  EXPECT_EQ(parsed.column("b"), 1u);
  EXPECT_THROW(parsed.column("c"), qaexpert::Error);
}
