#include "qaexpert/corpus.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "qaexpert/error.hpp"

namespace qaexpert::corpus {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxWarnings = 20;
constexpr int kStoreFormatVersion = 1;

void warn(IngestReport& report, std::string message) {
  if (report.warnings.size() < kMaxWarnings) report.warnings.push_back(std::move(message));
}

// Dumps disagree on whether timestamps are integers, floats or strings.
std::optional<std::int64_t> as_int(const json& value) {
  if (value.is_number_integer()) return value.get<std::int64_t>();
  if (value.is_number_float()) return static_cast<std::int64_t>(value.get<double>());
  if (value.is_string()) {
    try {
      return static_cast<std::int64_t>(io::parse_double(value.get<std::string>()));
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<double> as_double(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    try {
      return io::parse_double(value.get<std::string>());
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::string string_field(const json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

std::optional<json> parse_object(std::string_view line) {
  json object = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (object.is_discarded() || !object.is_object()) return std::nullopt;
  return object;
}

}  // namespace

bool is_deleted_author(std::string_view author) {
  return author.empty() || author == "[deleted]" || author == "[removed]";
}

std::string_view strip_fullname_prefix(std::string_view id) {
  if (id.size() > 3 && id[0] == 't' && id[1] >= '1' && id[1] <= '6' && id[2] == '_') {
    return id.substr(3);
  }
  return id;
}

std::optional<PostRecord> parse_post_line(std::string_view line) {
  auto object = parse_object(line);
  if (!object) return std::nullopt;
  const json& o = *object;
  PostRecord post;
  post.id = std::string(strip_fullname_prefix(string_field(o, "id")));
  post.author = string_field(o, "author");
  post.title = string_field(o, "title");
  post.body = string_field(o, "selftext");
  post.subreddit = string_field(o, "subreddit");
  const std::int64_t created = o.contains("created_utc") ? as_int(o["created_utc"]).value_or(0) : 0;
  auto ratio = o.contains("upvote_ratio") ? as_double(o["upvote_ratio"]) : std::nullopt;
  if (post.id.empty() || created <= 0 || !ratio || *ratio < 0.0 || *ratio > 1.0) {
    return std::nullopt;
  }
  post.created_utc = created;
  post.upvote_ratio = *ratio;
  if (o.contains("score")) {
    auto score = as_int(o["score"]);
    if (!score) return std::nullopt;
    post.score = *score;
  }
  if (o.contains("total_awards_received")) {
    auto awards = as_int(o["total_awards_received"]);
    if (!awards || *awards < 0) return std::nullopt;
    post.total_awards = *awards;
  }
  return post;
}

std::optional<CommentRecord> parse_comment_line(std::string_view line) {
  auto object = parse_object(line);
  if (!object) return std::nullopt;
  const json& o = *object;
  CommentRecord comment;
  comment.id = std::string(strip_fullname_prefix(string_field(o, "id")));
  comment.post_id = std::string(strip_fullname_prefix(string_field(o, "link_id")));
  comment.parent_id = std::string(strip_fullname_prefix(string_field(o, "parent_id")));
  comment.author = string_field(o, "author");
  comment.body = string_field(o, "body");
  const std::int64_t created = o.contains("created_utc") ? as_int(o["created_utc"]).value_or(0) : 0;
  if (comment.id.empty() || comment.post_id.empty() || comment.parent_id.empty() || created <= 0) {
    return std::nullopt;
  }
  comment.created_utc = created;
  if (o.contains("score")) {
    auto score = as_int(o["score"]);
    if (!score) return std::nullopt;
    comment.score = *score;
  }
  comment.is_top_level = comment.parent_id == comment.post_id;
  return comment;
}

std::string format_post_line(const PostRecord& post) {
  ordered_json o;
  o["id"] = post.id;
  o["author"] = post.author;
  o["title"] = post.title;
  o["selftext"] = post.body;
  o["created_utc"] = post.created_utc;
  o["score"] = post.score;
  o["upvote_ratio"] = post.upvote_ratio;
  o["total_awards_received"] = post.total_awards;
  o["subreddit"] = post.subreddit;
  return o.dump();
}

std::string format_comment_line(const CommentRecord& comment) {
  ordered_json o;
  o["id"] = comment.id;
  o["link_id"] = "t3_" + comment.post_id;
  o["parent_id"] = (comment.is_top_level ? "t3_" : "t1_") + comment.parent_id;
  o["author"] = comment.author;
  o["body"] = comment.body;
  o["created_utc"] = comment.created_utc;
  o["score"] = comment.score;
  return o.dump();
}

CorpusStore CorpusStore::from_records(std::vector<PostRecord> posts,
                                      std::vector<CommentRecord> comments,
                                      std::vector<UserRecord> accounts) {
  return assemble(std::move(posts), std::move(comments), std::move(accounts), IngestReport{});
}

namespace {

template <typename Record, typename Parser>
std::vector<Record> read_records(const fs::path& path, Parser parse, std::size_t& malformed,
                                 IngestReport& report) {
  std::vector<Record> records;
  const std::string text = io::read_text_file(path);
  std::size_t line_no = 0;
  for (const auto& line : io::split_lines(text)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    auto record = parse(line);
    if (!record) {
      ++malformed;
      warn(report, path.filename().string() + ":" + std::to_string(line_no) + ": malformed record");
      continue;
    }
    records.push_back(std::move(*record));
  }
  return records;
}

std::vector<UserRecord> read_accounts(const fs::path& path, IngestReport& report) {
  std::vector<UserRecord> accounts;
  std::size_t line_no = 0;
  for (const auto& line : io::split_lines(io::read_text_file(path))) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    auto object = parse_object(line);
    std::optional<std::int64_t> created;
    std::string name;
    if (object) {
      name = string_field(*object, "name");
      if (object->contains("created_utc")) created = as_int((*object)["created_utc"]);
    }
    if (name.empty() || !created || *created <= 0) {
      warn(report, path.filename().string() + ":" + std::to_string(line_no) + ": malformed user");
      continue;
    }
    accounts.push_back(UserRecord{name, created, 0});
  }
  return accounts;
}

}  // namespace

CorpusStore CorpusStore::ingest(const fs::path& posts_file, const fs::path& comments_file,
                                const std::optional<fs::path>& users_file) {
  IngestReport report;
  auto posts = read_records<PostRecord>(posts_file, parse_post_line, report.malformed_posts, report);
  auto comments =
      read_records<CommentRecord>(comments_file, parse_comment_line, report.malformed_comments, report);
  std::vector<UserRecord> accounts;
  if (users_file) accounts = read_accounts(*users_file, report);
  return assemble(std::move(posts), std::move(comments), std::move(accounts), std::move(report));
}

CorpusStore CorpusStore::assemble(std::vector<PostRecord> posts, std::vector<CommentRecord> comments,
                                  std::vector<UserRecord> accounts, IngestReport report) {
  CorpusStore store;
  std::unordered_set<std::string> seen;
  for (auto& post : posts) {
    if (!seen.insert(post.id).second) {
      ++report.duplicate_posts;
      warn(report, "duplicate post id " + post.id + " (kept first)");
      continue;
    }
    store.posts_.push_back(std::move(post));
  }

  seen.clear();
  std::vector<CommentRecord> unique_comments;
  for (auto& comment : comments) {
    if (!seen.insert(comment.id).second) {
      ++report.duplicate_comments;
      warn(report, "duplicate comment id " + comment.id + " (kept first)");
      continue;
    }
    comment.is_top_level = comment.parent_id == comment.post_id;
    unique_comments.push_back(std::move(comment));
  }

  std::unordered_set<std::string> post_ids;
  for (const auto& post : store.posts_) post_ids.insert(post.id);

  // Replies may precede their parents in a dump, so parents are resolved
  // against the complete id set. Quarantining a comment can orphan its
  // replies, hence the fixpoint loop.
  std::vector<CommentRecord> live = std::move(unique_comments);
  for (bool changed = true; changed;) {
    changed = false;
    std::unordered_set<std::string> live_ids;
    for (const auto& c : live) live_ids.insert(c.id);
    std::vector<CommentRecord> kept;
    kept.reserve(live.size());
    for (auto& c : live) {
      const bool post_ok = post_ids.count(c.post_id) > 0;
      const bool parent_ok = c.is_top_level || live_ids.count(c.parent_id) > 0;
      if (post_ok && parent_ok) {
        kept.push_back(std::move(c));
        continue;
      }
      warn(report, "comment " + c.id + " quarantined: missing " + (post_ok ? "parent" : "post"));
      store.quarantined_.push_back(std::move(c));
      changed = true;
    }
    live = std::move(kept);
  }
  store.comments_ = std::move(live);

  report.posts_loaded = store.posts_.size();
  report.comments_loaded = store.comments_.size();
  report.quarantined_comments = store.quarantined_.size();
  store.report_ = std::move(report);
  store.build_indexes(std::move(accounts));
  return store;
}

void CorpusStore::build_indexes(std::vector<UserRecord> accounts) {
  std::unordered_map<std::string, std::int64_t> first_seen;
  std::unordered_set<std::string> known;
  auto note_author = [&](const std::string& author, std::int64_t t) {
    if (is_deleted_author(author)) return;
    if (known.insert(author).second) authors_.push_back(author);
    auto [it, inserted] = first_seen.try_emplace(author, t);
    if (!inserted) it->second = std::min(it->second, t);
  };

  for (std::size_t i = 0; i < posts_.size(); ++i) {
    post_index_.emplace(posts_[i].id, i);
    posts_by_author_[posts_[i].author].push_back(i);
    note_author(posts_[i].author, posts_[i].created_utc);
  }
  for (std::size_t i = 0; i < comments_.size(); ++i) {
    const auto& c = comments_[i];
    comment_index_.emplace(c.id, i);
    comments_by_author_[c.author].push_back(i);
    if (c.is_top_level) top_level_by_post_[c.post_id].push_back(i);
    note_author(c.author, c.created_utc);
  }

  std::unordered_map<std::string, std::int64_t> account_dates;
  for (const auto& a : accounts) {
    if (a.account_created_utc) account_dates.try_emplace(a.username, *a.account_created_utc);
  }
  users_.reserve(authors_.size());
  for (const auto& name : authors_) {
    UserRecord user{name, std::nullopt, first_seen.at(name)};
    if (auto it = account_dates.find(name); it != account_dates.end()) {
      user.account_created_utc = it->second;
      ++report_.users_with_account_date;
    }
    user_index_.emplace(name, users_.size());
    users_.push_back(std::move(user));
  }
}

const PostRecord* CorpusStore::find_post(std::string_view id) const {
  auto it = post_index_.find(std::string(id));
  return it == post_index_.end() ? nullptr : &posts_[it->second];
}

const CommentRecord* CorpusStore::find_comment(std::string_view id) const {
  auto it = comment_index_.find(std::string(id));
  return it == comment_index_.end() ? nullptr : &comments_[it->second];
}

const UserRecord* CorpusStore::find_user(std::string_view username) const {
  auto it = user_index_.find(std::string(username));
  return it == user_index_.end() ? nullptr : &users_[it->second];
}

namespace {
std::span<const std::size_t> lookup(const std::unordered_map<std::string, std::vector<std::size_t>>& map,
                                    std::string_view key) {
  auto it = map.find(std::string(key));
  if (it == map.end()) return {};
  return it->second;
}
}  // namespace

std::span<const std::size_t> CorpusStore::posts_by(std::string_view author) const {
  return lookup(posts_by_author_, author);
}

std::span<const std::size_t> CorpusStore::comments_by(std::string_view author) const {
  return lookup(comments_by_author_, author);
}

std::span<const std::size_t> CorpusStore::top_level_comments_of(std::string_view post_id) const {
  return lookup(top_level_by_post_, post_id);
}

std::int64_t CorpusStore::parent_created_utc(const CommentRecord& comment) const {
  if (comment.is_top_level) {
    const PostRecord* post = find_post(comment.post_id);
    require(post != nullptr, ErrorCode::kNotFound, "post " + comment.post_id + " not in store");
    return post->created_utc;
  }
  const CommentRecord* parent = find_comment(comment.parent_id);
  require(parent != nullptr, ErrorCode::kNotFound, "comment " + comment.parent_id + " not in store");
  return parent->created_utc;
}

std::string CorpusStore::export_posts() const {
  std::string out;
  for (const auto& p : posts_) {
    out += format_post_line(p);
    out.push_back('\n');
  }
  return out;
}

std::string CorpusStore::export_comments() const {
  std::string out;
  for (const auto& c : comments_) {
    out += format_comment_line(c);
    out.push_back('\n');
  }
  return out;
}

void CorpusStore::save(const fs::path& dir) const {
  fs::create_directories(dir);
  io::write_text_file(dir / "posts.jsonl", export_posts());
  io::write_text_file(dir / "comments.jsonl", export_comments());
  std::string quarantine;
  for (const auto& c : quarantined_) {
    quarantine += format_comment_line(c);
    quarantine.push_back('\n');
  }
  io::write_text_file(dir / "quarantine.jsonl", quarantine);
  std::string users;
  for (const auto& u : users_) {
    if (!u.account_created_utc) continue;
    ordered_json o;
    o["name"] = u.username;
    o["created_utc"] = *u.account_created_utc;
    users += o.dump();
    users.push_back('\n');
  }
  io::write_text_file(dir / "users.jsonl", users);

  ordered_json meta;
  meta["format"] = "qaexpert-store";
  meta["version"] = kStoreFormatVersion;
  meta["posts"] = report_.posts_loaded;
  meta["comments"] = report_.comments_loaded;
  meta["malformed_posts"] = report_.malformed_posts;
  meta["malformed_comments"] = report_.malformed_comments;
  meta["duplicate_posts"] = report_.duplicate_posts;
  meta["duplicate_comments"] = report_.duplicate_comments;
  meta["quarantined_comments"] = report_.quarantined_comments;
  io::write_text_file(dir / "store.json", meta.dump(2) + "\n");
}

CorpusStore CorpusStore::load(const fs::path& dir) {
  require(fs::exists(dir / "store.json"), ErrorCode::kNotFound,
          "no corpus store at " + dir.string() + " (run `ingest` or `gen-fixture` first)");
  json meta = json::parse(io::read_text_file(dir / "store.json"));
  require(meta.value("format", "") == "qaexpert-store" && meta.value("version", 0) == kStoreFormatVersion,
          ErrorCode::kInvalidArgument, "unsupported store format in " + dir.string());

  std::optional<fs::path> users;
  if (fs::exists(dir / "users.jsonl")) users = dir / "users.jsonl";
  CorpusStore store = ingest(dir / "posts.jsonl", dir / "comments.jsonl", users);
  if (fs::exists(dir / "quarantine.jsonl")) {
    for (const auto& line : io::split_lines(io::read_text_file(dir / "quarantine.jsonl"))) {
      if (io::trim(line).empty()) continue;
      if (auto c = parse_comment_line(line)) store.quarantined_.push_back(std::move(*c));
    }
  }
  IngestReport& r = store.report_;
  r.malformed_posts = meta.value("malformed_posts", std::size_t{0});
  r.malformed_comments = meta.value("malformed_comments", std::size_t{0});
  r.duplicate_posts = meta.value("duplicate_posts", std::size_t{0});
  r.duplicate_comments = meta.value("duplicate_comments", std::size_t{0});
  r.quarantined_comments = store.quarantined_.size();
  return store;
}

SubredditMetrics subreddit_metrics(const CorpusStore& store) {
  SubredditMetrics m;
  m.unique_users = store.authors().size();
  m.submission_count = store.posts().size();
  m.comment_count = store.comments().size();
  m.quarantined_comments = store.quarantined().size();
  if (!store.comments().empty()) {
    double total_length = 0.0;
    for (const auto& c : store.comments()) total_length += static_cast<double>(c.body.size());
    m.avg_comment_length = total_length / static_cast<double>(m.comment_count);
  }
  if (m.submission_count == 0) {
    m.empty = true;
    return m;
  }
  const auto n = static_cast<double>(m.submission_count);
  double score = 0.0, ratio = 0.0, awards = 0.0;
  for (const auto& p : store.posts()) {
    score += static_cast<double>(p.score);
    ratio += p.upvote_ratio;
    awards += static_cast<double>(p.total_awards);
  }
  m.avg_comments_per_submission = static_cast<double>(m.comment_count) / n;
  m.avg_score = score / n;
  m.avg_upvote_ratio = ratio / n;
  m.avg_awards = awards / n;
  return m;
}

SampleResult sample_for_labeling(const CorpusStore& store, std::size_t n, const MonthWindow& window,
                                 std::uint64_t seed) {
  require(n > 0, ErrorCode::kInvalidArgument, "sample size must be positive");
  require(window.from <= window.to, ErrorCode::kInvalidArgument, "empty month window");

  SampleResult result;
  std::vector<io::YearMonth> months;
  for (io::YearMonth m = window.from; m <= window.to; m = m.next()) months.push_back(m);
  std::vector<std::vector<std::string>> candidates(months.size());

  for (const auto& post : store.posts()) {
    auto top = store.top_level_comments_of(post.id);
    if (top.size() < kMinTopLevelComments || top.size() > kMaxTopLevelComments) continue;
    ++result.eligible_posts;
    for (std::size_t idx : top) {
      const auto& c = store.comments()[idx];
      const io::YearMonth ym = io::utc_year_month(c.created_utc);
      if (ym < window.from || window.to < ym) continue;
      std::size_t slot = 0;
      while (!(months[slot] == ym)) ++slot;
      candidates[slot].push_back(c.id);
      ++result.eligible_comments;
    }
  }
  if (result.eligible_posts == 0) {
    result.notes.emplace_back("no eligible posts (need 5..20 top-level comments)");
  }

  std::mt19937_64 rng(seed);
  // Months receive leftover units in a seeded order, so the +1 months vary with the seed.
  std::vector<std::size_t> rank(months.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<std::size_t> priority(months.size());
  for (std::size_t r = 0; r < rank.size(); ++r) priority[rank[r]] = r;

  // Water-filling: repeatedly give one unit to the least-served month with
  // spare capacity. Non-saturated months end within one of each other.
  std::vector<std::size_t> alloc(months.size(), 0);
  std::size_t remaining = n;
  while (remaining > 0) {
    std::optional<std::size_t> best;
    for (std::size_t m = 0; m < months.size(); ++m) {
      if (alloc[m] >= candidates[m].size()) continue;
      if (!best || alloc[m] < alloc[*best] ||
          (alloc[m] == alloc[*best] && priority[m] < priority[*best])) {
        best = m;
      }
    }
    if (!best) break;
    ++alloc[*best];
    --remaining;
  }
  if (remaining > 0 && result.eligible_posts > 0) {
    result.notes.push_back("only " + std::to_string(n - remaining) + " of " + std::to_string(n) +
                           " requested comments are eligible");
  }

  const std::size_t balanced = n / months.size();
  for (std::size_t m = 0; m < months.size(); ++m) {
    auto& pool = candidates[m];
    std::sort(pool.begin(), pool.end());
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < alloc[m]; ++i) result.comment_ids.push_back(pool[i]);
    result.per_month.push_back(MonthAllocation{months[m], pool.size(), alloc[m]});
    if (alloc[m] < balanced) {
      result.imbalanced = true;
      result.notes.push_back("month " + io::to_string(months[m]) + " has only " +
                             std::to_string(pool.size()) + " eligible comments; shortfall filled from other months");
    }
  }
  return result;
}

}  // namespace qaexpert::corpus
