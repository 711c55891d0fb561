#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaexpert/labels.hpp"

namespace qaexpert::learners {

using Row = std::span<const double>;
using Distribution = std::array<double, kNumClasses>;

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> X;
  std::vector<Label> y;

  std::size_t n_rows() const { return X.size(); }
  std::size_t n_features() const { return feature_names.size(); }
  // Throws kInvalidArgument on ragged rows, size mismatch or non-finite values.
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset select_columns(std::span<const std::size_t> columns) const;
  std::array<std::size_t, kNumClasses> class_counts() const;
};

// argmax with ties going to the lowest class index.
Label argmax(const Distribution& distribution);

enum class LearnerKind { Logistic, Tree, Forest, RuleFit, Majority };

std::string_view to_string(LearnerKind kind);
// Accepts "logistic"/"lr", "tree"/"dt", "forest"/"rf", "rulefit", "majority".
LearnerKind parse_kind(std::string_view text);

struct LogisticConfig {
  double l2_penalty = 1e-3;
  std::size_t max_iter = 500;
  double tol = 1e-6;  // on the gradient norm
  std::uint64_t seed = 0;
};

enum class SplitCriterion { Gini, Entropy };

struct TreeConfig {
  std::size_t max_depth = 10;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;
  SplitCriterion criterion = SplitCriterion::Gini;
};

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 12;
  std::size_t min_leaf = 1;
  std::size_t mtry = 0;  // features tried per split; 0 means ceil(sqrt(p))
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 means hardware concurrency
  SplitCriterion criterion = SplitCriterion::Gini;
};

struct RuleFitConfig {
  std::size_t n_trees = 30;
  std::size_t max_depth = 3;
  double l1_penalty = 1e-3;
  double subsample = 0.5;         // fraction of rows per rule-generating tree
  std::size_t mtry = 0;           // 0 means ceil(sqrt(p))
  double winsor_quantile = 0.025; // linear terms are clipped to [q, 1 - q]
  std::size_t max_iter = 1000;
  double tol = 1e-7;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x[feature] <= threshold go left
  int left = -1;
  int right = -1;
  Distribution distribution{};  // class proportions of the training rows in the node
  std::size_t n_samples = 0;
  double impurity = 0.0;

  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<double> impurity_decrease;  // per feature, unnormalised

  const TreeNode& leaf_for(Row row) const;
  Distribution predict_proba(Row row) const { return leaf_for(row).distribution; }
  std::size_t depth() const;
  bool operator==(const DecisionTree&) const = default;
};

struct LogisticModel {
  std::vector<double> mean;   // standardisation
  std::vector<double> scale;
  std::array<std::vector<double>, kNumClasses> weights;  // on standardised features
  Distribution bias{};
  std::size_t iterations = 0;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  double oob_accuracy = -1.0;  // -1 when no row was ever out of bag
};

struct Condition {
  std::size_t feature = 0;
  double threshold = 0.0;
  bool less_equal = true;  // x <= threshold, otherwise x > threshold

  bool operator==(const Condition&) const = default;
};

struct Rule {
  std::vector<Condition> conditions;  // conjunction, sorted by (feature, direction)

  bool applies(Row row) const;
  std::string describe(const std::vector<std::string>& feature_names) const;
  bool operator==(const Rule&) const = default;
};

struct LinearTerm {
  std::size_t feature = 0;
  double lower = 0.0;  // winsorisation bounds
  double upper = 0.0;
};

struct RuleFitModel {
  std::vector<Rule> rules;
  std::vector<LinearTerm> linear;
  // Standardisation of the design columns (rules first, then linear terms).
  std::vector<double> mean;
  std::vector<double> scale;
  std::array<std::vector<double>, kNumClasses> coefficients;  // one-vs-rest
  Distribution intercept{};

  std::vector<double> design_row(Row row) const;
};

struct MajorityModel {
  Distribution priors{};
};

using ModelParameters = std::variant<LogisticModel, DecisionTree, ForestModel, RuleFitModel, MajorityModel>;

// Uniform contract over every learner kind.
class TrainedModel {
 public:
  TrainedModel(LearnerKind kind, std::vector<std::string> feature_names, nlohmann::json config,
               std::uint64_t seed, ModelParameters parameters);

  LearnerKind kind() const { return kind_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t n_features() const { return feature_names_.size(); }
  const nlohmann::json& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const ModelParameters& parameters() const { return parameters_; }

  // Throws kInvalidArgument when the row width differs from training.
  Distribution predict_proba(Row row) const;
  Label predict(Row row) const { return argmax(predict_proba(row)); }
  std::vector<Distribution> predict_proba(const std::vector<std::vector<double>>& rows) const;
  std::vector<Label> predict(const std::vector<std::vector<double>>& rows) const;

  // Non-negative, summing to 1. Trees and forests use impurity decrease,
  // RuleFit spreads coefficient mass over each term's features, logistic
  // uses normalised absolute standardised weights. Uniform when the model
  // carries no signal at all.
  std::vector<double> feature_importances() const;

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

 private:
  LearnerKind kind_;
  std::vector<std::string> feature_names_;
  nlohmann::json config_;
  std::uint64_t seed_;
  ModelParameters parameters_;
};

TrainedModel train_logistic(const Dataset& data, const LogisticConfig& config = {});
TrainedModel train_tree(const Dataset& data, const TreeConfig& config = {});
TrainedModel train_forest(const Dataset& data, const ForestConfig& config = {});
TrainedModel train_rulefit(const Dataset& data, const RuleFitConfig& config = {});
// Always predicts the training class priors.
TrainedModel train_majority(const Dataset& data);

// Kind plus JSON hyperparameters; unknown keys are rejected.
struct LearnerSpec {
  LearnerKind kind = LearnerKind::Forest;
  nlohmann::json params = nlohmann::json::object();
};
TrainedModel train(const Dataset& data, const LearnerSpec& spec);

LogisticConfig logistic_config(const nlohmann::json& params);
TreeConfig tree_config(const nlohmann::json& params);
ForestConfig forest_config(const nlohmann::json& params);
RuleFitConfig rulefit_config(const nlohmann::json& params);
nlohmann::json to_json(const LogisticConfig& c);
nlohmann::json to_json(const TreeConfig& c);
nlohmann::json to_json(const ForestConfig& c);
nlohmann::json to_json(const RuleFitConfig& c);

// Grows one CART tree on `rows` (indices into data, repeats allowed).
// mtry = 0 or >= p tries every feature and draws nothing from `rng_seed`.
DecisionTree grow_tree(const Dataset& data, std::span<const std::size_t> rows, std::size_t max_depth,
                       std::size_t min_leaf, std::size_t mtry, std::uint64_t rng_seed,
                       SplitCriterion criterion = SplitCriterion::Gini);

// Deterministic per-stream seed derivation (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace qaexpert::learners
