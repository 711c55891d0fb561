#include "qaexpert/features.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "qaexpert/error.hpp"

namespace qaexpert::features {

using nlohmann::json;

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Nlp: return "nlp";
    case Family::Crowd: return "crowd";
    case Family::User: return "user";
  }
  return "unknown";
}

Family parse_family(std::string_view text) {
  if (text == "nlp") return Family::Nlp;
  if (text == "crowd") return Family::Crowd;
  if (text == "user") return Family::User;
  fail(ErrorCode::kInvalidArgument, "unknown feature family '" + std::string(text) + "'");
}

UserFeatures user_features(const corpus::CorpusStore& store, std::string_view username, std::int64_t snapshot_utc) {
  const auto comments = store.comments_by(username);
  const auto posts = store.posts_by(username);
  require(!comments.empty() || !posts.empty(), ErrorCode::kNotFound,
          "user '" + std::string(username) + "' has no items in the store");
  UserFeatures f;
  f.n_comments = static_cast<double>(comments.size());
  f.n_posts = static_cast<double>(posts.size());
  f.no_comments = comments.empty();
  f.no_posts = posts.empty();
  double score_sum = 0.0, comment_words = 0.0, post_words = 0.0, response = 0.0;
  for (std::size_t i : comments) {
    const auto& c = store.comments()[i];
    comment_words += static_cast<double>(textpipe::count_words(c.body));
    score_sum += static_cast<double>(c.score);
    response += static_cast<double>(c.created_utc - store.parent_created_utc(c));
  }
  for (std::size_t i : posts) {
    const auto& p = store.posts()[i];
    post_words += static_cast<double>(textpipe::count_words(p.title) + textpipe::count_words(p.body));
    score_sum += static_cast<double>(p.score);
  }
  if (!comments.empty()) {
    f.avg_words_in_comments = comment_words / f.n_comments;
    f.avg_response_time_s = response / f.n_comments;
  }
  if (!posts.empty()) f.avg_words_in_posts = post_words / f.n_posts;
  f.avg_score = score_sum / (f.n_comments + f.n_posts);

  std::int64_t since = 0;
  const auto* user = store.find_user(username);
  if (user && user->account_created_utc) {
    since = *user->account_created_utc;
  } else if (user) {
    since = user->first_seen_utc;
  } else {
    since = snapshot_utc;
  }
  f.days_member = std::max(0.0, static_cast<double>(snapshot_utc - since) / 86400.0);
  return f;
}

// ---------------------------------------------------------------------------

double TextModel::expert_probability(std::string_view text) const {
  const auto tokens = textpipe::preprocess(text);
  return vectorize::expert_probability(margin, tfidf.transform(tokens.tokens));
}

json TextModel::to_json() const {
  return json{{"format", "qaexpert-text-model"}, {"version", 1}, {"tfidf", tfidf.to_json()}, {"margin", margin.to_json()}};
}

TextModel TextModel::from_json(const json& j) {
  try {
    require(j.at("format").get<std::string>() == "qaexpert-text-model", ErrorCode::kInvalidArgument,
            "not a text model file");
    require(j.at("version").get<int>() == 1, ErrorCode::kInvalidArgument, "unsupported text model version");
    TextModel m;
    m.tfidf = vectorize::TfidfModel::from_json(j.at("tfidf"));
    m.margin = vectorize::MarginModel::from_json(j.at("margin"));
    require(m.margin.weights.size() == m.tfidf.vocabulary_size(), ErrorCode::kInvalidArgument,
            "text model: weight vector does not match the vocabulary");
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed text model: ") + e.what());
  }
}

void TextModel::save(const std::filesystem::path& path) const { io::write_text_file(path, to_json().dump()); }

TextModel TextModel::load(const std::filesystem::path& path) {
  const json j = json::parse(io::read_text_file(path), nullptr, false);
  require(!j.is_discarded(), ErrorCode::kInvalidArgument, "text model is not valid JSON: " + path.string());
  return from_json(j);
}

namespace {

std::vector<std::string> sorted_ids(const std::unordered_map<std::string, Label>& labels) {
  std::vector<std::string> ids;
  ids.reserve(labels.size());
  for (const auto& [id, label] : labels) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

const corpus::CommentRecord& comment_or_throw(const corpus::CorpusStore& store, std::string_view id) {
  const auto* c = store.find_comment(id);
  require(c != nullptr, ErrorCode::kNotFound, "comment '" + std::string(id) + "' is not in the store");
  return *c;
}

}  // namespace

TextModel fit_text_model(const corpus::CorpusStore& store, const std::unordered_map<std::string, Label>& labels,
                         const vectorize::MarginConfig& config, vectorize::IdfMode mode) {
  std::vector<std::vector<std::string>> documents;
  documents.reserve(store.comments().size());
  for (const auto& c : store.comments()) documents.push_back(textpipe::preprocess(c.body).tokens);
  TextModel model;
  model.tfidf = vectorize::TfidfModel::fit(documents, mode);

  std::vector<vectorize::SparseVector> vectors;
  std::vector<bool> positive;
  for (const auto& id : sorted_ids(labels)) {
    const auto& c = comment_or_throw(store, id);
    vectors.push_back(model.tfidf.transform(textpipe::preprocess(c.body).tokens));
    positive.push_back(labels.at(id) == Label::Expert);
  }
  model.margin = vectorize::train_margin_classifier(vectors, positive, model.tfidf.vocabulary_size(), config);
  return model;
}

std::unordered_map<std::string, double> out_of_fold_probabilities(const corpus::CorpusStore& store,
                                                                  const TextModel& model,
                                                                  const std::unordered_map<std::string, Label>& labels,
                                                                  const vectorize::MarginConfig& config,
                                                                  std::size_t folds) {
  require(folds >= 2, ErrorCode::kInvalidArgument, "need at least two folds");
  const auto ids = sorted_ids(labels);
  std::vector<vectorize::SparseVector> vectors;
  std::vector<bool> positive;
  for (const auto& id : ids) {
    vectors.push_back(model.tfidf.transform(textpipe::preprocess(comment_or_throw(store, id).body).tokens));
    positive.push_back(labels.at(id) == Label::Expert);
  }
  std::vector<std::size_t> fold(ids.size());
  std::mt19937_64 rng(config.seed ^ 0x5bd1e995ULL);
  for (bool cls : {true, false}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (positive[i] == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t r = 0; r < members.size(); ++r) fold[members[r]] = r % folds;
  }
  std::unordered_map<std::string, double> out;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<vectorize::SparseVector> train;
    std::vector<bool> train_positive;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (fold[i] == f) continue;
      train.push_back(vectors[i]);
      train_positive.push_back(positive[i]);
    }
    const auto partial =
        vectorize::train_margin_classifier(train, train_positive, model.tfidf.vocabulary_size(), config);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (fold[i] == f) out[ids[i]] = vectorize::expert_probability(partial, vectors[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& column_names() {
  static const std::vector<std::string> names = {
      // text
      "word_count", "syllable_count", "polysyllable_count", "char_count", "difficult_word_count",
      "avg_word_length", "avg_sentence_length", "sentence_count", "reading_time_s", "entropy_bits", "polarity",
      "subjectivity", "data_science_score", "category_programming", "category_technology",
      "flesch_reading_ease", "flesch_kincaid_grade", "gunning_fog", "smog", "automated_readability_index",
      "coleman_liau", "dale_chall", "spache", "expert_probability",
      // crowd
      "comment_score", "comment_karma",
      // user
      "user_n_comments", "user_n_posts", "user_avg_words_in_comments", "user_avg_words_in_posts",
      "user_avg_score", "user_days_member", "user_avg_response_time_s", "user_missing"};
  return names;
}

const std::vector<Family>& column_families() {
  static const std::vector<Family> families = [] {
    std::vector<Family> f(24, Family::Nlp);
    f.insert(f.end(), 2, Family::Crowd);
    f.insert(f.end(), 8, Family::User);
    return f;
  }();
  return families;
}

std::vector<double> nlp_columns(const textpipe::TextMetrics& m, double expert_probability) {
  auto category = [&](const char* name) {
    auto it = m.category_scores.find(name);
    return it == m.category_scores.end() ? 0.0 : it->second;
  };
  const auto& r = m.readability;
  return {static_cast<double>(m.word_count),
          static_cast<double>(m.syllable_count),
          static_cast<double>(m.polysyllable_count),
          static_cast<double>(m.char_count),
          static_cast<double>(m.difficult_word_count),
          m.avg_word_length,
          m.avg_sentence_length,
          static_cast<double>(m.sentence_count),
          m.reading_time_s,
          m.entropy_bits,
          m.polarity,
          m.subjectivity,
          m.data_science_score,
          category("programming"),
          category("technology"),
          r.flesch_reading_ease,
          r.flesch_kincaid_grade,
          r.gunning_fog,
          r.smog,
          r.automated_readability_index,
          r.coleman_liau,
          r.dale_chall,
          r.spache,
          expert_probability};
}

namespace {

std::vector<double> user_columns(const UserFeatures& u, bool missing) {
  return {u.n_comments, u.n_posts, u.avg_words_in_comments, u.avg_words_in_posts, u.avg_score,
          u.days_member, u.avg_response_time_s, missing ? 1.0 : 0.0};
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace

FeatureMatrix assemble(const corpus::CorpusStore& store, std::span<const std::string> comment_ids,
                       const TextModel& model, const AssembleOptions& options) {
  FeatureMatrix matrix;
  matrix.feature_names = column_names();
  matrix.families = column_families();
  matrix.ids.assign(comment_ids.begin(), comment_ids.end());
  matrix.rows.resize(comment_ids.size());

  std::vector<const corpus::CommentRecord*> records;
  records.reserve(comment_ids.size());
  for (const auto& id : comment_ids) records.push_back(&comment_or_throw(store, id));

  // Per-author aggregates, computed once.
  std::unordered_map<std::string, std::vector<double>> per_author;
  for (const auto* c : records) {
    if (corpus::is_deleted_author(c->author) || per_author.count(c->author)) continue;
    per_author.emplace(c->author, user_columns(user_features(store, c->author, options.snapshot_utc), false));
  }
  // Store-wide medians over every known author, for deleted accounts.
  std::vector<double> imputed(8, 0.0);
  bool any_deleted = std::any_of(records.begin(), records.end(),
                                 [](const auto* c) { return corpus::is_deleted_author(c->author); });
  if (any_deleted) {
    std::vector<std::vector<double>> columns(7);
    for (const auto& author : store.authors()) {
      const auto row = user_columns(user_features(store, author, options.snapshot_utc), false);
      for (std::size_t k = 0; k < 7; ++k) columns[k].push_back(row[k]);
    }
    for (std::size_t k = 0; k < 7; ++k) imputed[k] = median(columns[k]);
    imputed[7] = 1.0;
  }

  auto build_row = [&](std::size_t i) {
    const auto& c = *records[i];
    const auto metrics = textpipe::measure(c.body);
    auto override_it = options.expert_probability_override.find(c.id);
    const double probability = override_it != options.expert_probability_override.end()
                                   ? override_it->second
                                   : model.expert_probability(c.body);
    std::vector<double> row = nlp_columns(metrics, probability);
    const auto karma_it = options.karma_override.find(c.id);
    row.push_back(static_cast<double>(c.score));
    row.push_back(karma_it != options.karma_override.end() ? karma_it->second : static_cast<double>(c.score));
    const auto& user = corpus::is_deleted_author(c.author) ? imputed : per_author.at(c.author);
    row.insert(row.end(), user.begin(), user.end());
    for (double& v : row) {
      if (!std::isfinite(v)) v = 0.0;
    }
    matrix.rows[i] = std::move(row);
  };

  std::size_t threads = options.threads == 0 ? std::thread::hardware_concurrency() : options.threads;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, records.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < records.size(); ++i) build_row(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
          try {
            build_row(i);
          } catch (...) {
            std::lock_guard lock(mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  return matrix;
}

// ---------------------------------------------------------------------------

std::size_t FeatureMatrix::column(std::string_view name) const {
  auto it = std::find(feature_names.begin(), feature_names.end(), name);
  require(it != feature_names.end(), ErrorCode::kNotFound, "no feature named '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - feature_names.begin());
}

std::size_t FeatureMatrix::row_of(std::string_view id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  require(it != ids.end(), ErrorCode::kNotFound, "no feature row for '" + std::string(id) + "'");
  return static_cast<std::size_t>(it - ids.begin());
}

std::string FeatureMatrix::header_hash() const {
  std::string header = "id";
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    header += "," + feature_names[j] + ":" + std::string(to_string(families[j]));
  }
  return io::hex64(io::fnv1a64(header));
}

io::Table FeatureMatrix::to_table() const {
  io::Table table;
  table.header.push_back("id");
  table.header.insert(table.header.end(), feature_names.begin(), feature_names.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> cells{ids[i]};
    for (double v : rows[i]) cells.push_back(io::format_double(v));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

json FeatureMatrix::manifest() const {
  json columns = json::array();
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    columns.push_back(json{{"name", feature_names[j]}, {"family", std::string(to_string(families[j]))}});
  }
  return json{{"format", "qaexpert-features"},
              {"version", 1},
              {"columns", columns},
              {"header_hash", header_hash()},
              {"rows", rows.size()}};
}

void FeatureMatrix::save(const std::filesystem::path& csv, const std::filesystem::path& manifest_file) const {
  io::write_table(csv, to_table());
  io::write_text_file(manifest_file, manifest().dump(2) + "\n");
}

FeatureMatrix FeatureMatrix::load(const std::filesystem::path& csv, const std::filesystem::path& manifest_file) {
  const json manifest = json::parse(io::read_text_file(manifest_file), nullptr, false);
  require(!manifest.is_discarded() && manifest.value("format", "") == "qaexpert-features", ErrorCode::kInvalidArgument,
          "not a feature manifest: " + manifest_file.string());
  FeatureMatrix m;
  for (const auto& col : manifest.at("columns")) {
    m.feature_names.push_back(col.at("name").get<std::string>());
    m.families.push_back(parse_family(col.at("family").get<std::string>()));
  }
  const io::Table table = io::read_table(csv);
  require(table.header.size() == m.feature_names.size() + 1 && table.header.front() == "id",
          ErrorCode::kInvalidArgument, "feature table header does not match its manifest");
  for (std::size_t j = 0; j < m.feature_names.size(); ++j) {
    require(table.header[j + 1] == m.feature_names[j], ErrorCode::kInvalidArgument,
            "feature table column " + std::to_string(j + 1) + " does not match its manifest");
  }
  require(m.header_hash() == manifest.value("header_hash", ""), ErrorCode::kInvalidArgument,
          "feature manifest hash mismatch");
  for (const auto& cells : table.rows) {
    m.ids.push_back(cells.at(0));
    std::vector<double> row;
    row.reserve(m.feature_names.size());
    for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(io::parse_double(cells[j]));
    m.rows.push_back(std::move(row));
  }
  return m;
}

}  // namespace qaexpert::features
