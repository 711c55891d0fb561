#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qaexpert/corpus.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/features.hpp"
#include "qaexpert/io_util.hpp"
#include "qaexpert/labels.hpp"
#include "qaexpert/stats.hpp"

namespace qaexpert::profiles {

enum class UserType { Expert, NonExpert, OutOfScope, Unclassified };

std::string_view to_string(UserType type);

struct UserProfile {
  std::string username;
  std::size_t n_labelled_items = 0;  // predicted comments by the user
  std::size_t n_comments = 0;        // all comments in the store
  std::size_t n_posts = 0;           // all posts in the store
  double share_expert = 0.0;
  double share_nonexpert = 0.0;
  double share_oos = 0.0;
  UserType user_type = UserType::Unclassified;
};

enum class ActivityRule {
  Total,  // comments + posts >= min_activity
  Each,   // comments >= min_activity and posts >= min_activity
};

struct ProfileOptions {
  std::size_t min_activity = 5;
  ActivityRule rule = ActivityRule::Total;
  double type_threshold = 0.5;
};

// Profiles for every non-deleted author of a predicted comment who passes the
// activity filter, sorted by username. A user takes the class whose share
// reaches the threshold; no such class, or two classes at exactly 0.5, gives
// Unclassified.
std::vector<UserProfile> classify_users(const std::unordered_map<std::string, Label>& predictions,
                                        const corpus::CorpusStore& store, const ProfileOptions& options = {});

struct FeatureSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  bool defined = false;  // false for classes with fewer than two members
};

struct StructuredError {
  ErrorCode code = ErrorCode::kInternal;
  std::string message;
};

struct Characteristics {
  std::vector<std::string> feature_names;
  std::array<std::size_t, kNumClasses> class_sizes{};
  std::array<std::vector<FeatureSummary>, kNumClasses> per_class;
  std::vector<std::optional<stats::AnovaResult>> anova;  // nullopt when fewer than two classes qualify
  std::optional<stats::ManovaResult> manova;
  std::optional<StructuredError> manova_error;
  std::vector<std::string> notes;
};

// Per-class descriptive statistics, one-way ANOVA per feature over the
// classes with at least two members, and MANOVA over the whole matrix.
// Throws kPrecondition if a predicted comment has no feature row.
Characteristics class_characteristics(const std::unordered_map<std::string, Label>& predictions,
                                      const features::FeatureMatrix& matrix, bool run_manova = true);

// MANOVA across predicted classes; throws kPrecondition with fewer than two.
stats::ManovaResult manova_by_class(const std::unordered_map<std::string, Label>& predictions,
                                    const features::FeatureMatrix& matrix);

struct RadarTable {
  std::vector<std::string> feature_names;
  std::vector<UserType> types;             // non-empty types only, in class order
  std::vector<std::size_t> user_counts;
  std::vector<std::vector<double>> raw;    // [type][feature] mean of per-user means
  std::vector<std::vector<double>> normalized;  // min-max across types, 0 for a flat feature
  std::vector<std::string> notes;
};

// Per-user means of the user's comment rows, averaged within each user type.
// `features` restricts the columns; empty means all of them.
RadarTable profile_summary(const std::vector<UserProfile>& profiles, const features::FeatureMatrix& matrix,
                           const corpus::CorpusStore& store, const std::vector<std::string>& features = {});

io::Table profiles_table(const std::vector<UserProfile>& profiles);
io::Table characteristics_table(const Characteristics& c);
io::Table anova_table(const Characteristics& c);
io::Table radar_table(const RadarTable& r);

}  // namespace qaexpert::profiles
