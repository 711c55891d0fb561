#include "qaexpert/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "qaexpert/error.hpp"
#include "qaexpert/stats.hpp"

namespace qaexpert::evalkit {

using nlohmann::json;

Trainer make_trainer(const learners::LearnerSpec& spec) {
  return [spec](const Dataset& data) { return learners::train(data, spec); };
}

double binary_auc(std::span<const double> scores, const std::vector<bool>& is_positive) {
  require(scores.size() == is_positive.size(), ErrorCode::kInvalidArgument, "AUC inputs differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (is_positive[order[t]]) {
        rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  require(positives > 0 && negatives > 0, ErrorCode::kPrecondition, "AUC needs positives and negatives");
  const auto np = static_cast<double>(positives);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

Metrics metrics(std::span<const Label> y_true, std::span<const Label> y_pred,
                std::span<const Distribution> probabilities) {
  require(y_true.size() == y_pred.size(), ErrorCode::kInvalidArgument, "metrics: label vectors differ in length");
  require(probabilities.empty() || probabilities.size() == y_true.size(), ErrorCode::kInvalidArgument,
          "metrics: probabilities do not match the labels");
  require(!y_true.empty(), ErrorCode::kInvalidArgument, "metrics: no rows");
  Metrics m;
  m.n = y_true.size();
  const auto n = static_cast<double>(m.n);
  std::size_t correct = 0;
  double abs_err = 0.0, ss_res = 0.0, mean_true = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    if (y_true[i] == y_pred[i]) ++correct;
    m.confusion[index(y_true[i])][index(y_pred[i])] += 1.0;
    const double d = code(y_true[i]) - code(y_pred[i]);
    abs_err += std::abs(d);
    ss_res += d * d;
    mean_true += code(y_true[i]);
  }
  mean_true /= n;
  double ss_tot = 0.0;
  for (Label l : y_true) ss_tot += (code(l) - mean_true) * (code(l) - mean_true);
  for (auto& row : m.confusion) {
    for (double& v : row) v /= n;
  }
  m.accuracy = static_cast<double>(correct) / n;
  m.mae = abs_err / n;
  m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);

  double auc_sum = 0.0;
  std::size_t auc_classes = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<double> scores(m.n);
    std::vector<bool> positive(m.n);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < m.n; ++i) {
      if (!probabilities.empty()) {
        const auto& row = probabilities[i];
        const double sum = row[0] + row[1] + row[2];
        require(std::abs(sum - 1.0) < 1e-6, ErrorCode::kInvalidArgument, "metrics: probabilities must sum to 1");
        scores[i] = row[c];
      } else {
        scores[i] = index(y_pred[i]) == c ? 1.0 : 0.0;
      }
      positive[i] = index(y_true[i]) == c;
      pos += positive[i] ? 1 : 0;
    }
    if (pos == 0 || pos == m.n) {
      m.warnings.push_back(std::string("AUC for class '") + std::string(to_string(label_from_code(static_cast<int>(c)))) +
                           "' is undefined and excluded from the macro mean");
      continue;
    }
    auc_sum += binary_auc(scores, positive);
    ++auc_classes;
  }
  m.auc_macro_ovr = auc_classes > 0 ? auc_sum / static_cast<double>(auc_classes)
                                    : std::numeric_limits<double>::quiet_NaN();
  return m;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const Label> y, std::size_t k, std::uint64_t seed,
                                                       std::vector<std::string>* warnings) {
  require(k >= 2, ErrorCode::kInvalidArgument, "k must be at least 2");
  require(k <= y.size(), ErrorCode::kInvalidArgument,
          "k = " + std::to_string(k) + " exceeds the " + std::to_string(y.size()) + " rows");
  std::vector<std::vector<std::size_t>> folds(k);
  std::mt19937_64 rng(seed);
  std::size_t cursor = 0;
  for (Label label : kAllLabels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == label) members.push_back(i);
    }
    if (members.empty()) continue;
    if (members.size() < k && warnings) {
      warnings->push_back("class '" + std::string(to_string(label)) + "' has " + std::to_string(members.size()) +
                          " rows, fewer than k; it is spread one row per fold");
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) {
      folds[cursor % k].push_back(idx);
      ++cursor;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

namespace {

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
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

}  // namespace

CrossValidation cross_validate(const Dataset& data, const Trainer& trainer, std::size_t k, std::uint64_t seed,
                               std::size_t threads) {
  data.validate();
  require(static_cast<bool>(trainer), ErrorCode::kInvalidArgument, "cross-validation needs a learner");
  CrossValidation cv;
  std::vector<std::string> warnings;
  cv.folds = stratified_folds(data.y, k, seed, &warnings);
  const std::size_t n = data.n_rows();
  cv.predictions.assign(n, Label::Expert);
  cv.probabilities.assign(n, Distribution{});
  std::vector<Metrics> per_fold(k);

  parallel_for(k, threads, [&](std::size_t f) {
    std::vector<char> is_test(n, 0);
    for (std::size_t i : cv.folds[f]) is_test[i] = 1;
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_test[i]) train_rows.push_back(i);
    }
    const auto model = trainer(data.subset(train_rows));
    std::vector<Label> truth, predicted;
    std::vector<Distribution> proba;
    for (std::size_t i : cv.folds[f]) {
      const auto d = model.predict_proba(data.X[i]);
      cv.probabilities[i] = d;
      cv.predictions[i] = learners::argmax(d);
      truth.push_back(data.y[i]);
      predicted.push_back(cv.predictions[i]);
      proba.push_back(d);
    }
    per_fold[f] = metrics(truth, predicted, proba);
  });

  static_cast<Metrics&>(cv.report) = metrics(data.y, cv.predictions, cv.probabilities);
  cv.report.warnings.insert(cv.report.warnings.begin(), warnings.begin(), warnings.end());
  cv.report.per_fold = std::move(per_fold);
  return cv;
}

EvalReport kfold_cv(const Dataset& data, const Trainer& trainer, std::size_t k, std::uint64_t seed) {
  return cross_validate(data, trainer, k, seed).report;
}

std::vector<json> expand_grid(const nlohmann::ordered_json& grid) {
  std::vector<json> points;
  if (grid.is_array()) {
    for (const auto& p : grid) {
      require(p.is_object(), ErrorCode::kInvalidArgument, "grid points must be objects");
      points.push_back(json::parse(p.dump()));
    }
  } else {
    require(grid.is_object(), ErrorCode::kInvalidArgument, "grid must be an object or an array of objects");
    std::vector<std::pair<std::string, std::vector<json>>> axes;
    for (const auto& [key, values] : grid.items()) {
      std::vector<json> options;
      if (values.is_array()) {
        for (const auto& v : values) options.push_back(json::parse(v.dump()));
      } else {
        options.push_back(json::parse(values.dump()));
      }
      require(!options.empty(), ErrorCode::kInvalidArgument, "grid axis '" + key + "' has no values");
      axes.emplace_back(key, std::move(options));
    }
    std::size_t total = 1;
    for (const auto& axis : axes) total *= axis.second.size();
    for (std::size_t combo = 0; combo < total; ++combo) {
      json point = json::object();
      std::size_t rest = combo;
      for (std::size_t a = axes.size(); a-- > 0;) {
        point[axes[a].first] = axes[a].second[rest % axes[a].second.size()];
        rest /= axes[a].second.size();
      }
      points.push_back(std::move(point));
    }
  }
  require(!points.empty(), ErrorCode::kInvalidArgument, "grid is empty");
  return points;
}

GridResult grid_search(const Dataset& data, learners::LearnerKind kind, const nlohmann::ordered_json& grid,
                       std::size_t k, std::uint64_t seed, const json& base) {
  GridResult result;
  for (const auto& point : expand_grid(grid)) {
    json params = base.is_null() ? json::object() : base;
    for (const auto& [key, value] : point.items()) params[key] = value;
    GridPoint row;
    row.params = params;
    row.report = kfold_cv(data, make_trainer({kind, params}), k, seed);
    result.table.push_back(std::move(row));
  }
  auto auc_or_floor = [](double v) { return std::isnan(v) ? -1.0 : v; };
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    const auto& cand = result.table[i].report;
    const auto& best = result.table[result.best_index].report;
    if (cand.accuracy > best.accuracy ||
        (cand.accuracy == best.accuracy && auc_or_floor(cand.auc_macro_ovr) > auc_or_floor(best.auc_macro_ovr))) {
      result.best_index = i;
    }
  }
  result.best_params = result.table[result.best_index].params;
  return result;
}

std::string_view to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::Variance: return "variance";
    case SelectionMethod::KBest: return "kbest";
    case SelectionMethod::Percentile: return "percentile";
    case SelectionMethod::Rfe: return "rfe";
    case SelectionMethod::Sfs: return "sfs";
  }
  return "unknown";
}

SelectionMethod parse_selection_method(std::string_view text) {
  for (auto m : {SelectionMethod::Variance, SelectionMethod::KBest, SelectionMethod::Percentile, SelectionMethod::Rfe,
                 SelectionMethod::Sfs}) {
    if (text == to_string(m)) return m;
  }
  fail(ErrorCode::kInvalidArgument, "unknown selection method '" + std::string(text) + "'");
}

namespace {

std::vector<double> anova_scores(const Dataset& data) {
  std::vector<double> scores(data.n_features(), 0.0);
  for (std::size_t j = 0; j < data.n_features(); ++j) {
    std::vector<std::vector<double>> groups(kNumClasses);
    for (std::size_t i = 0; i < data.n_rows(); ++i) groups[index(data.y[i])].push_back(data.X[i][j]);
    groups.erase(std::remove_if(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); }), groups.end());
    scores[j] = stats::anova_oneway(groups).f_value;
  }
  return scores;
}

// Indices of the `count` highest scores (ties to the lowest index), in column order.
std::vector<std::size_t> top_by_score(const std::vector<double>& scores, std::size_t count) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

SelectionResult select_features(const Dataset& data, SelectionMethod method, const SelectionParams& params,
                                const Trainer& learner) {
  data.validate();
  const std::size_t p = data.n_features();
  require(p > 0 && data.n_rows() > 0, ErrorCode::kInvalidArgument, "selection needs a non-empty dataset");
  SelectionResult result;
  result.method = method;
  result.scores.assign(p, 0.0);

  switch (method) {
    case SelectionMethod::Variance: {
      require(params.threshold >= 0.0, ErrorCode::kInvalidArgument, "variance threshold must be >= 0");
      for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0;
        for (const auto& row : data.X) mean += row[j];
        mean /= static_cast<double>(data.n_rows());
        double ss = 0.0;
        for (const auto& row : data.X) ss += (row[j] - mean) * (row[j] - mean);
        result.scores[j] = ss / static_cast<double>(data.n_rows());
        if (result.scores[j] > params.threshold) result.kept_indices.push_back(j);
      }
      break;
    }
    case SelectionMethod::KBest:
    case SelectionMethod::Percentile: {
      std::size_t count = params.k;
      if (method == SelectionMethod::KBest) {
        require(params.k >= 1 && params.k <= p, ErrorCode::kInvalidArgument, "k must be in [1, p]");
      } else {
        require(params.percentile > 0.0 && params.percentile <= 100.0, ErrorCode::kInvalidArgument,
                "percentile must be in (0, 100]");
        count = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(static_cast<double>(p) * params.percentile / 100.0 - 1e-9)));
      }
      result.scores = anova_scores(data);
      result.kept_indices = top_by_score(result.scores, count);
      break;
    }
    case SelectionMethod::Rfe: {
      require(static_cast<bool>(learner), ErrorCode::kInvalidArgument, "rfe needs a learner");
      require(params.target_size >= 1 && params.target_size <= p, ErrorCode::kInvalidArgument,
              "target size must be in [1, p]");
      std::vector<std::size_t> remaining(p);
      std::iota(remaining.begin(), remaining.end(), std::size_t{0});
      double rank = static_cast<double>(p - params.target_size + 1);
      while (remaining.size() > params.target_size) {
        const auto model = learner(data.select_columns(remaining));
        const auto importance = model.feature_importances();
        std::size_t worst = 0;
        for (std::size_t c = 1; c < remaining.size(); ++c) {
          if (importance[c] < importance[worst]) worst = c;
        }
        result.scores[remaining[worst]] = rank;
        rank -= 1.0;
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(worst));
      }
      for (std::size_t j : remaining) result.scores[j] = 1.0;
      result.kept_indices = remaining;
      break;
    }
    case SelectionMethod::Sfs: {
      require(static_cast<bool>(learner), ErrorCode::kInvalidArgument, "sfs needs a learner");
      require(params.target_size >= 1 && params.target_size <= p, ErrorCode::kInvalidArgument,
              "target size must be in [1, p]");
      std::vector<char> chosen(p, 0);
      while (result.kept_indices.size() < params.target_size) {
        std::size_t best = p;
        double best_accuracy = -1.0;
        for (std::size_t j = 0; j < p; ++j) {
          if (chosen[j]) continue;
          std::vector<std::size_t> columns = result.kept_indices;
          columns.push_back(j);
          const double acc =
              kfold_cv(data.select_columns(columns), learner, params.cv_folds, params.seed).accuracy;
          if (acc > best_accuracy) {
            best_accuracy = acc;
            best = j;
          }
        }
        chosen[best] = 1;
        result.scores[best] = best_accuracy;
        result.kept_indices.push_back(best);
      }
      break;
    }
  }
  require(!result.kept_indices.empty(), ErrorCode::kPrecondition, "feature selection eliminated every feature");
  for (std::size_t j : result.kept_indices) result.kept.push_back(data.feature_names[j]);
  return result;
}

}  // namespace qaexpert::evalkit
