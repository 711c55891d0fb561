#include "qaexpert/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "qaexpert/error.hpp"

namespace qaexpert::fixture {

namespace {

// Portable draws: the standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t range(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1)); }
  bool chance(double p) { return uniform() < p; }
  template <typename T>
  const T& pick(const std::vector<T>& items) { return items[range(0, items.size() - 1)]; }
  double normal() {
    const double u1 = std::max(uniform(), 1e-300);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

const std::vector<std::string> kExpertTerms = {
    "regression",     "classifier",     "gradient",       "regularization", "overfitting",   "hyperparameter",
    "validation",     "distribution",   "probability",    "variance",       "covariance",    "feature",
    "dataset",        "pipeline",       "tensor",         "matrix",         "embedding",     "optimization",
    "convergence",    "algorithm",      "bayesian",       "inference",      "estimator",     "likelihood",
    "normalization",  "dimensionality", "clustering",     "python",         "pandas",        "numpy",
    "sklearn",        "pytorch",        "implementation", "architecture",   "statistical",   "significance",
    "correlation",    "interpretability", "preprocessing", "sql",           "database",      "algorithmic",
    "multicollinearity", "heteroscedasticity", "bootstrap", "stochastic",   "parameter",     "evaluation"};

const std::vector<std::string> kExpertGlue = {
    "because", "therefore", "however", "typically", "instead", "consider", "using", "the",  "a",
    "of",      "to",        "with",    "when",      "your",    "model",    "data",  "you",  "should",
    "can",     "this",      "that",    "is",        "it",      "in",       "on",    "for",  "each",
    "then",    "which",     "usually", "depends",   "between", "before",   "after", "your", "training"};

const std::vector<std::string> kCasualWords = {
    "i",    "think", "maybe", "you",   "could", "try",    "it",     "the",    "data",  "some",
    "course", "learn", "job",  "good", "really", "start",  "with",   "just",   "know",  "people",
    "python", "books", "online", "work", "time", "bit",   "stuff",  "sure",   "pretty", "lot",
    "like", "get",   "need",  "help",  "also",  "watch",  "videos", "first",  "my",    "experience"};

const std::vector<std::string> kOffTopic = {
    "Thanks!",
    "Thank you so much",
    "lol",
    "Haha nice",
    "Same here",
    "Following",
    "This made my day",
    "Great post, thanks",
    "Check https://example.com/meme",
    "\xF0\x9F\x98\x82\xF0\x9F\x98\x82",
    "Congrats!",
    "Good luck op",
    "Saved",
    "Nice one \xF0\x9F\x99\x82",
    "Wrong sub mate",
    "See https://youtu.be/dQw4w9WgXcQ"};

const std::vector<std::string> kQuestionStarts = {"How do I", "Should I", "What is the best way to", "Is it worth it to",
                                                  "Any advice on how to"};
const std::vector<std::string> kQuestionTopics = {
    "learn statistics for data science", "switch careers into analytics", "deploy a model to production",
    "handle imbalanced classes",         "prepare for interviews",        "choose between R and Python",
    "clean messy survey data",           "tune a random forest",          "explain results to managers"};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string sentence(Rng& rng, std::size_t words, const std::vector<std::string>& primary,
                     const std::vector<std::string>& secondary, double primary_share, char end) {
  std::string out;
  for (std::size_t w = 0; w < words; ++w) {
    const auto& word = rng.chance(primary_share) ? rng.pick(primary) : rng.pick(secondary);
    if (w > 0) out += ' ';
    out += w == 0 ? capitalize(word) : word;
  }
  out += end;
  return out;
}

std::string comment_text(Rng& rng, Label label) {
  std::string text;
  switch (label) {
    case Label::Expert: {
      const std::size_t sentences = rng.range(4, 7);
      for (std::size_t s = 0; s < sentences; ++s) {
        if (s > 0) text += ' ';
        text += sentence(rng, rng.range(12, 22), kExpertTerms, kExpertGlue, 0.45, '.');
      }
      if (rng.chance(0.3)) text += " For example `model.fit(X, y)` with a held-out split.";
      break;
    }
    case Label::NonExpert: {
      const std::size_t sentences = rng.range(1, 3);
      for (std::size_t s = 0; s < sentences; ++s) {
        if (s > 0) text += ' ';
        text += sentence(rng, rng.range(6, 14), kExpertTerms, kCasualWords, 0.06, rng.chance(0.2) ? '!' : '.');
      }
      break;
    }
    case Label::OutOfScope: {
      text = rng.pick(kOffTopic);
      if (rng.chance(0.25)) text += " " + rng.pick(kOffTopic);
      break;
    }
  }
  return text;
}

std::string base36(std::uint64_t value) {
  static const char* digits = "0123456789abcdefghijklmnopqrstuvwxyz";
  std::string out;
  do {
    out.insert(out.begin(), digits[value % 36]);
    value /= 36;
  } while (value > 0);
  return out;
}

struct Profile {
  double min_delay_s;
  double max_delay_s;
  std::int64_t min_score;
  std::int64_t max_score;
};

Profile profile_of(Label label) {
  switch (label) {
    case Label::Expert: return {3600, 12 * 3600, 2, 60};
    case Label::NonExpert: return {600, 6 * 3600, -2, 15};
    case Label::OutOfScope: return {60, 2 * 3600, -5, 8};
  }
  return {60, 3600, 0, 1};
}

}  // namespace

Fixture generate_fixture(const FixtureConfig& config) {
  require(config.n_posts > 0, ErrorCode::kInvalidArgument, "fixture needs at least one post");
  require(config.n_comments >= config.n_posts, ErrorCode::kInvalidArgument,
          "fixture needs at least as many comments as posts");
  require(config.from <= config.to, ErrorCode::kInvalidArgument, "fixture window is empty");
  Rng rng(config.seed);
  Fixture fx;

  // Users: a dominant class and a lognormal activity weight each.
  const std::size_t n_users = config.n_users > 0 ? config.n_users : std::max<std::size_t>(10, config.n_comments / 12);
  std::vector<std::string> users(n_users);
  std::vector<int> dominant(n_users);  // 0..2 class code, 3 = mixed
  std::vector<double> cumulative(n_users);
  std::vector<corpus::UserRecord> accounts;
  const std::int64_t window_start = io::epoch_seconds(config.from.year, config.from.month, 1);
  const io::YearMonth after = config.to.next();
  const std::int64_t window_end = io::epoch_seconds(after.year, after.month, 1) - 86400;
  double total_weight = 0.0;
  for (std::size_t u = 0; u < n_users; ++u) {
    users[u] = "user_" + base36(1000 + u * 7919);
    const double roll = rng.uniform();
    dominant[u] = roll < 0.20 ? 0 : roll < 0.65 ? 1 : roll < 0.90 ? 2 : 3;
    if (dominant[u] < 3) fx.user_type[users[u]] = label_from_code(dominant[u]);
    total_weight += std::exp(0.9 * rng.normal());
    cumulative[u] = total_weight;
    if (rng.chance(0.9)) {
      corpus::UserRecord account;
      account.username = users[u];
      account.account_created_utc = window_start - static_cast<std::int64_t>(rng.range(30, 3000)) * 86400;
      accounts.push_back(account);
    }
  }
  auto draw_user = [&]() -> std::size_t {
    const double x = rng.uniform() * total_weight;
    return static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin()) %
           n_users;
  };
  auto class_for = [&](std::size_t u) {
    if (dominant[u] == 3) return label_from_code(static_cast<int>(rng.range(0, 2)));
    if (rng.chance(0.8)) return label_from_code(dominant[u]);
    return label_from_code((dominant[u] + static_cast<int>(rng.range(1, 2))) % 3);
  };

  // Posts spread evenly over the window.
  std::vector<corpus::PostRecord> posts;
  const double span = static_cast<double>(window_end - window_start);
  for (std::size_t p = 0; p < config.n_posts; ++p) {
    corpus::PostRecord post;
    post.id = base36(36ULL * 36 * 36 * 36 * 36 + p * 13);
    post.author = users[draw_user()];
    post.title = rng.pick(kQuestionStarts) + " " + rng.pick(kQuestionTopics) + "?";
    post.body = sentence(rng, rng.range(8, 20), kExpertTerms, kCasualWords, 0.15, '.');
    post.created_utc = window_start + static_cast<std::int64_t>((static_cast<double>(p) + rng.uniform()) /
                                                                 static_cast<double>(config.n_posts) * span);
    post.score = static_cast<std::int64_t>(rng.range(0, 40));
    post.upvote_ratio = std::round((0.5 + 0.5 * rng.uniform()) * 100.0) / 100.0;
    post.total_awards = rng.chance(0.1) ? static_cast<std::int64_t>(rng.range(1, 3)) : 0;
    post.subreddit = config.subreddit;
    posts.push_back(std::move(post));
  }

  // Top-level comments: per-post weights mostly in 5..20, with a few
  // outliers on both sides so the eligibility filter has work to do.
  const std::size_t n_top = std::max(config.n_posts, static_cast<std::size_t>(0.85 * static_cast<double>(config.n_comments)));
  std::vector<double> weights(config.n_posts);
  for (double& w : weights) {
    const double roll = rng.uniform();
    w = static_cast<double>(roll < 0.06 ? rng.range(1, 4) : roll < 0.10 ? rng.range(21, 30) : rng.range(5, 20));
  }
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> top_counts(config.n_posts, 1);
  std::size_t assigned = config.n_posts;
  std::vector<std::pair<double, std::size_t>> remainders;
  for (std::size_t p = 0; p < config.n_posts; ++p) {
    const double share = weights[p] / weight_sum * static_cast<double>(n_top - config.n_posts);
    const auto whole = static_cast<std::size_t>(share);
    top_counts[p] += whole;
    assigned += whole;
    remainders.emplace_back(-(share - static_cast<double>(whole)), p);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t r = 0; assigned < n_top; ++r, ++assigned) ++top_counts[remainders[r % remainders.size()].second];

  std::vector<corpus::CommentRecord> comments;
  std::vector<std::vector<std::size_t>> by_post(config.n_posts);
  std::uint64_t next_comment = 36ULL * 36 * 36 * 36 * 36 * 36;
  auto make_comment = [&](std::size_t post_index, const std::string& parent_id, std::int64_t parent_time) {
    const std::size_t u = rng.chance(0.01) ? n_users : draw_user();
    const Label label = u == n_users ? label_from_code(static_cast<int>(rng.range(0, 2))) : class_for(u);
    const Profile profile = profile_of(label);
    corpus::CommentRecord c;
    c.id = base36(next_comment);
    next_comment += 17;
    c.post_id = posts[post_index].id;
    c.parent_id = parent_id;
    c.author = u == n_users ? "[deleted]" : users[u];
    c.body = comment_text(rng, label);
    c.created_utc = parent_time + static_cast<std::int64_t>(profile.min_delay_s +
                                                            rng.uniform() * (profile.max_delay_s - profile.min_delay_s));
    c.score = profile.min_score + static_cast<std::int64_t>(rng.range(0, static_cast<std::size_t>(profile.max_score - profile.min_score)));
    c.is_top_level = parent_id == posts[post_index].id;
    fx.planted[c.id] = label;
    by_post[post_index].push_back(comments.size());
    comments.push_back(std::move(c));
  };
  for (std::size_t p = 0; p < config.n_posts; ++p) {
    for (std::size_t k = 0; k < top_counts[p]; ++k) make_comment(p, posts[p].id, posts[p].created_utc);
  }
  for (std::size_t r = n_top; r < config.n_comments; ++r) {
    const std::size_t p = rng.range(0, config.n_posts - 1);
    const std::size_t parent = by_post[p][rng.range(0, by_post[p].size() - 1)];
    const std::string parent_id = comments[parent].id;
    const std::int64_t parent_time = comments[parent].created_utc;
    make_comment(p, parent_id, parent_time);
  }

  fx.store = corpus::CorpusStore::from_records(std::move(posts), std::move(comments), std::move(accounts));
  if (config.n_labelled > 0) {
    const auto sample =
        corpus::sample_for_labeling(fx.store, config.n_labelled, corpus::MonthWindow{config.from, config.to}, config.seed);
    fx.labelled_ids = sample.comment_ids;
  }
  return fx;
}

}  // namespace qaexpert::fixture
