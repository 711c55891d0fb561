#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qaexpert/io_util.hpp"

namespace qaexpert::corpus {

struct PostRecord {
  std::string id;
  std::string author;
  std::string title;
  std::string body;
  std::int64_t created_utc = 0;
  std::int64_t score = 0;  // upvotes minus downvotes
  double upvote_ratio = 0.0;
  std::int64_t total_awards = 0;
  std::string subreddit;

  bool operator==(const PostRecord&) const = default;
};

struct CommentRecord {
  std::string id;
  std::string post_id;
  std::string parent_id;  // post id for top-level comments, otherwise a comment id
  std::string author;
  std::string body;
  std::int64_t created_utc = 0;
  std::int64_t score = 0;
  bool is_top_level = false;

  bool operator==(const CommentRecord&) const = default;
};

struct UserRecord {
  std::string username;
  std::optional<std::int64_t> account_created_utc;
  std::int64_t first_seen_utc = 0;  // min over the user's item timestamps
};

// Authors Reddit reports for removed accounts; treated as "no user".
bool is_deleted_author(std::string_view author);

// Reddit fullnames carry a kind prefix ("t1_" comment, "t3_" link/post).
std::string_view strip_fullname_prefix(std::string_view id);

// One record per line, Reddit API field names. Parsing returns nullopt for
// lines that are not valid JSON objects or violate a record invariant.
std::optional<PostRecord> parse_post_line(std::string_view line);
std::optional<CommentRecord> parse_comment_line(std::string_view line);
std::string format_post_line(const PostRecord& post);
std::string format_comment_line(const CommentRecord& comment);

struct IngestReport {
  std::size_t posts_loaded = 0;
  std::size_t comments_loaded = 0;
  std::size_t malformed_posts = 0;
  std::size_t malformed_comments = 0;
  std::size_t duplicate_posts = 0;
  std::size_t duplicate_comments = 0;
  std::size_t quarantined_comments = 0;  // dangling post or parent reference
  std::size_t users_with_account_date = 0;
  std::vector<std::string> warnings;     // first few problems, for humans
};

// In-memory view of one subreddit with indexes by post id, comment id and
// author. Immutable after construction; all accessors are safe to call from
// many threads.
class CorpusStore {
 public:
  CorpusStore() = default;

  // Builds indexes, drops duplicates (first occurrence wins) and moves
  // comments with unresolved post/parent references into quarantine.
  static CorpusStore from_records(std::vector<PostRecord> posts,
                                  std::vector<CommentRecord> comments,
                                  std::vector<UserRecord> accounts = {});

  // Reads line-delimited dumps. Malformed lines are skipped and counted;
  // an unreadable file throws kIo. `users` optionally lists account
  // creation dates as {"name": ..., "created_utc": ...} lines.
  static CorpusStore ingest(const std::filesystem::path& posts_file,
                            const std::filesystem::path& comments_file,
                            const std::optional<std::filesystem::path>& users_file = std::nullopt);

  // On-disk store directory (see README for the layout).
  void save(const std::filesystem::path& dir) const;
  static CorpusStore load(const std::filesystem::path& dir);

  std::string export_posts() const;
  std::string export_comments() const;

  const std::vector<PostRecord>& posts() const { return posts_; }
  const std::vector<CommentRecord>& comments() const { return comments_; }
  const std::vector<CommentRecord>& quarantined() const { return quarantined_; }
  const IngestReport& report() const { return report_; }

  const PostRecord* find_post(std::string_view id) const;
  const CommentRecord* find_comment(std::string_view id) const;
  const UserRecord* find_user(std::string_view username) const;

  // Indices into posts()/comments().
  std::span<const std::size_t> posts_by(std::string_view author) const;
  std::span<const std::size_t> comments_by(std::string_view author) const;
  std::span<const std::size_t> top_level_comments_of(std::string_view post_id) const;

  // Non-deleted authors in first-appearance order (posts, then comments).
  const std::vector<std::string>& authors() const { return authors_; }
  const std::vector<UserRecord>& users() const { return users_; }

  // created_utc of the item a comment replies to (post or parent comment).
  std::int64_t parent_created_utc(const CommentRecord& comment) const;

 private:
  static CorpusStore assemble(std::vector<PostRecord> posts, std::vector<CommentRecord> comments,
                              std::vector<UserRecord> accounts, IngestReport report);
  void build_indexes(std::vector<UserRecord> accounts);

  std::vector<PostRecord> posts_;
  std::vector<CommentRecord> comments_;
  std::vector<CommentRecord> quarantined_;
  std::vector<UserRecord> users_;
  std::vector<std::string> authors_;
  IngestReport report_;

  std::unordered_map<std::string, std::size_t> post_index_;
  std::unordered_map<std::string, std::size_t> comment_index_;
  std::unordered_map<std::string, std::size_t> user_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> posts_by_author_;
  std::unordered_map<std::string, std::vector<std::size_t>> comments_by_author_;
  std::unordered_map<std::string, std::vector<std::size_t>> top_level_by_post_;
};

struct SubredditMetrics {
  std::size_t unique_users = 0;
  std::size_t submission_count = 0;
  std::size_t comment_count = 0;
  std::size_t quarantined_comments = 0;
  double avg_comments_per_submission = 0.0;
  double avg_comment_length = 0.0;  // characters
  double avg_score = 0.0;           // per submission
  double avg_upvote_ratio = 0.0;
  double avg_awards = 0.0;
  bool empty = false;  // no submissions; means reported as 0
};

SubredditMetrics subreddit_metrics(const CorpusStore& store);

struct MonthWindow {
  io::YearMonth from;
  io::YearMonth to;  // inclusive
};

struct MonthAllocation {
  io::YearMonth month;
  std::size_t available = 0;
  std::size_t selected = 0;
};

struct SampleResult {
  std::vector<std::string> comment_ids;
  std::vector<MonthAllocation> per_month;
  std::size_t eligible_posts = 0;
  std::size_t eligible_comments = 0;
  bool imbalanced = false;  // some month could not reach its balanced share
  std::vector<std::string> notes;
};

inline constexpr std::size_t kMinTopLevelComments = 5;
inline constexpr std::size_t kMaxTopLevelComments = 20;

// Draws top-level comments of posts with 5..20 top-level comments (closed
// interval), spread as evenly as possible over the UTC calendar months of
// the window. Deterministic for a given seed.
SampleResult sample_for_labeling(const CorpusStore& store, std::size_t n, const MonthWindow& window,
                                 std::uint64_t seed);

}  // namespace qaexpert::corpus
