#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaexpert/learners.hpp"

namespace qaexpert::evalkit {

using learners::Dataset;
using learners::Distribution;
using Trainer = std::function<learners::TrainedModel(const Dataset&)>;

Trainer make_trainer(const learners::LearnerSpec& spec);

using Confusion = std::array<std::array<double, kNumClasses>, kNumClasses>;  // [true][predicted]

struct Metrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  double auc_macro_ovr = 0.0;  // NaN when no class has both positives and negatives
  double mae = 0.0;            // on integer class codes
  double r2 = 0.0;             // on integer class codes
  Confusion confusion{};       // proportions of all rows
  std::vector<std::string> warnings;
};

struct EvalReport : Metrics {
  std::vector<Metrics> per_fold;
};

// Ranking AUC with half credit for ties. Throws unless both groups are present.
double binary_auc(std::span<const double> scores, const std::vector<bool>& is_positive);

// Empty `probabilities` scores the AUC on one-hot predictions.
Metrics metrics(std::span<const Label> y_true, std::span<const Label> y_pred,
                std::span<const Distribution> probabilities = {});

// Stratified folds: each class is shuffled with the seed and dealt
// round-robin, continuing the fold cursor from class to class, so fold sizes
// differ by at most one. Returns the test indices of each fold.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const Label> y, std::size_t k, std::uint64_t seed,
                                                       std::vector<std::string>* warnings = nullptr);

struct CrossValidation {
  EvalReport report;
  std::vector<std::vector<std::size_t>> folds;
  std::vector<Label> predictions;          // pooled, aligned with dataset rows
  std::vector<Distribution> probabilities;  // pooled, aligned with dataset rows
};

CrossValidation cross_validate(const Dataset& data, const Trainer& trainer, std::size_t k = 10,
                               std::uint64_t seed = 0, std::size_t threads = 1);
EvalReport kfold_cv(const Dataset& data, const Trainer& trainer, std::size_t k = 10, std::uint64_t seed = 0);

// A grid is either an object mapping parameter names to arrays of values
// (expanded as a cartesian product, last key varying fastest, keys in file
// order) or an array of explicit parameter objects.
std::vector<nlohmann::json> expand_grid(const nlohmann::ordered_json& grid);

struct GridPoint {
  nlohmann::json params;
  EvalReport report;
};

struct GridResult {
  std::vector<GridPoint> table;  // one row per grid point, in grid order
  std::size_t best_index = 0;
  nlohmann::json best_params;
};

// Best = highest accuracy, then higher AUC, then earliest in the grid.
// `base` parameters are applied under every grid point.
GridResult grid_search(const Dataset& data, learners::LearnerKind kind, const nlohmann::ordered_json& grid,
                       std::size_t k = 10, std::uint64_t seed = 0,
                       const nlohmann::json& base = nlohmann::json::object());

enum class SelectionMethod { Variance, KBest, Percentile, Rfe, Sfs };

std::string_view to_string(SelectionMethod method);
SelectionMethod parse_selection_method(std::string_view text);

struct SelectionParams {
  double threshold = 0.0;     // variance
  std::size_t k = 10;         // kbest
  double percentile = 10.0;   // percentile, in (0, 100]
  std::size_t target_size = 10;  // rfe, sfs
  std::size_t cv_folds = 5;   // sfs
  std::uint64_t seed = 0;     // sfs fold assignment
};

struct SelectionResult {
  SelectionMethod method = SelectionMethod::Variance;
  std::vector<std::string> kept;
  std::vector<std::size_t> kept_indices;
  // variance: feature variance; kbest/percentile: ANOVA F; rfe: ranking
  // (1 = kept, larger = eliminated earlier); sfs: CV accuracy at the step
  // the feature was added (0 if never added).
  std::vector<double> scores;
};

// kept is in column order except for sfs, which lists features in the
// order they were added. Ties always go to the lowest feature index.
SelectionResult select_features(const Dataset& data, SelectionMethod method, const SelectionParams& params,
                                const Trainer& learner = {});

}  // namespace qaexpert::evalkit
