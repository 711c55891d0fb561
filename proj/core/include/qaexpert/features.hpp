#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaexpert/corpus.hpp"
#include "qaexpert/labels.hpp"
#include "qaexpert/textpipe.hpp"
#include "qaexpert/vectorize.hpp"

namespace qaexpert::features {

enum class Family { Nlp, Crowd, User };

std::string_view to_string(Family family);
Family parse_family(std::string_view text);

struct UserFeatures {
  double n_comments = 0;
  double n_posts = 0;
  double avg_words_in_comments = 0;  // 0 with no_comments set when there are none
  double avg_words_in_posts = 0;     // 0 with no_posts set when there are none
  double avg_score = 0;              // over comments and posts
  double days_member = 0;
  double avg_response_time_s = 0;    // comment time minus parent item time
  bool no_comments = false;
  bool no_posts = false;
};

// Throws kNotFound for a user without items in the store.
UserFeatures user_features(const corpus::CorpusStore& store, std::string_view username, std::int64_t snapshot_utc);

// TF-IDF vocabulary plus the expert-vs-rest margin classifier.
struct TextModel {
  vectorize::TfidfModel tfidf;
  vectorize::MarginModel margin;

  double expert_probability(std::string_view text) const;
  nlohmann::json to_json() const;
  static TextModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TextModel load(const std::filesystem::path& path);
};

// TF-IDF is fit on every comment in the store; the margin classifier on the
// labelled ones (Expert against the other two classes).
TextModel fit_text_model(const corpus::CorpusStore& store, const std::unordered_map<std::string, Label>& labels,
                         const vectorize::MarginConfig& config = {},
                         vectorize::IdfMode mode = vectorize::IdfMode::Smoothed);

// expert_probability for each labelled comment from a margin classifier that
// did not see it (stratified folds), so the meta-feature does not leak the
// label into downstream cross-validation.
std::unordered_map<std::string, double> out_of_fold_probabilities(
    const corpus::CorpusStore& store, const TextModel& model, const std::unordered_map<std::string, Label>& labels,
    const vectorize::MarginConfig& config = {}, std::size_t folds = 5);

struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::vector<Family> families;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const;  // throws kNotFound
  std::size_t row_of(std::string_view id) const;    // throws kNotFound
  std::string header_hash() const;

  // Delimited table (first column "id") plus a JSON sidecar listing families.
  io::Table to_table() const;
  nlohmann::json manifest() const;
  void save(const std::filesystem::path& csv, const std::filesystem::path& manifest_file) const;
  static FeatureMatrix load(const std::filesystem::path& csv, const std::filesystem::path& manifest_file);
};

// Fixed column order: 24 text columns, 2 crowd columns, 8 user columns.
const std::vector<std::string>& column_names();
const std::vector<Family>& column_families();

// The 24 text columns for one comment.
std::vector<double> nlp_columns(const textpipe::TextMetrics& metrics, double expert_probability);

struct AssembleOptions {
  std::int64_t snapshot_utc = 0;
  // Replaces the model's expert_probability for the listed comments.
  std::unordered_map<std::string, double> expert_probability_override;
  // Dumps usually carry no separate karma; it defaults to the comment score.
  std::unordered_map<std::string, double> karma_override;
  std::size_t threads = 0;  // 0 means hardware concurrency
};

// One row per id. Comments by deleted authors get the store-wide median of
// every user column and user_missing = 1.
FeatureMatrix assemble(const corpus::CorpusStore& store, std::span<const std::string> comment_ids,
                       const TextModel& model, const AssembleOptions& options);

}  // namespace qaexpert::features
