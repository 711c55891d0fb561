#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "learner_support.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/learners.hpp"

namespace qaexpert::learners {

const TreeNode& DecisionTree::leaf_for(Row row) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i];
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> depth_of(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, depth_of[i]);
    if (nodes[i].feature >= 0) {
      depth_of[static_cast<std::size_t>(nodes[i].left)] = depth_of[i] + 1;
      depth_of[static_cast<std::size_t>(nodes[i].right)] = depth_of[i] + 1;
    }
  }
  return deepest;
}

namespace {

using Counts = std::array<std::size_t, kNumClasses>;

// Node impurity multiplied by the node size.
double weighted_impurity(const Counts& counts, std::size_t n, SplitCriterion criterion) {
  if (n == 0) return 0.0;
  const auto nd = static_cast<double>(n);
  if (criterion == SplitCriterion::Gini) {
    double sum_sq = 0.0;
    for (std::size_t c : counts) sum_sq += static_cast<double>(c) * static_cast<double>(c);
    return nd - sum_sq / nd;
  }
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double cd = static_cast<double>(c);
    h -= cd * std::log2(cd / nd);
  }
  return h;
}

class Grower {
 public:
  Grower(const Dataset& data, std::size_t max_depth, std::size_t min_leaf, std::size_t mtry,
         std::uint64_t seed, SplitCriterion criterion)
      : data_(data),
        max_depth_(max_depth),
        min_leaf_(std::max<std::size_t>(1, min_leaf)),
        mtry_(mtry >= data.n_features() ? 0 : mtry),
        rng_(seed),
        criterion_(criterion) {
    tree_.impurity_decrease.assign(data.n_features(), 0.0);
    all_features_.resize(data.n_features());
    std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
  }

  DecisionTree grow(std::vector<std::size_t> rows) {
    build(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double child_impurity = 0.0;
  };

  std::vector<std::size_t> candidate_features() {
    if (mtry_ == 0) return all_features_;
    std::vector<std::size_t> pool = all_features_;
    for (std::size_t i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng_)]);
    }
    pool.resize(mtry_);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  Split best_split(const std::vector<std::size_t>& rows, const Counts& counts, double parent) {
    const std::size_t n = rows.size();
    const double tolerance = 1e-12 * static_cast<double>(n);
    Split best;
    best.child_impurity = parent;
    std::vector<std::pair<double, std::size_t>> order(n);
    for (std::size_t f : candidate_features()) {
      for (std::size_t k = 0; k < n; ++k) order[k] = {data_.X[rows[k]][f], rows[k]};
      std::sort(order.begin(), order.end());
      Counts left{};
      for (std::size_t k = 0; k + 1 < n; ++k) {
        ++left[index(data_.y[order[k].second])];
        const std::size_t n_left = k + 1;
        const std::size_t n_right = n - n_left;
        if (order[k].first == order[k + 1].first) continue;
        if (n_left < min_leaf_ || n_right < min_leaf_) continue;
        Counts right{};
        for (std::size_t c = 0; c < kNumClasses; ++c) right[c] = counts[c] - left[c];
        const double score =
            weighted_impurity(left, n_left, criterion_) + weighted_impurity(right, n_right, criterion_);
        if (score < best.child_impurity - tolerance) {
          const double a = order[k].first;
          const double b = order[k + 1].first;
          double threshold = 0.5 * (a + b);
          if (!(threshold < b)) threshold = a;
          best = Split{static_cast<int>(f), threshold, score};
        }
      }
    }
    return best;
  }

  int build(const std::vector<std::size_t>& rows, std::size_t depth) {
    Counts counts{};
    for (std::size_t r : rows) ++counts[index(data_.y[r])];
    const std::size_t n = rows.size();
    const double parent = weighted_impurity(counts, n, criterion_);

    const int id = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.n_samples = n;
    node.impurity = n > 0 ? parent / static_cast<double>(n) : 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      node.distribution[c] = n > 0 ? static_cast<double>(counts[c]) / static_cast<double>(n) : 0.0;
    }
    tree_.nodes.push_back(node);

    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    if (depth >= max_depth_ || pure || n < 2 * min_leaf_) return id;

    const Split split = best_split(rows, counts, parent);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (data_.X[r][static_cast<std::size_t>(split.feature)] <= split.threshold ? left_rows : right_rows).push_back(r);
    }
    tree_.impurity_decrease[static_cast<std::size_t>(split.feature)] += parent - split.child_impurity;
    const int left = build(left_rows, depth + 1);
    const int right = build(right_rows, depth + 1);
    TreeNode& self = tree_.nodes[static_cast<std::size_t>(id)];
    self.feature = split.feature;
    self.threshold = split.threshold;
    self.left = left;
    self.right = right;
    return id;
  }

  const Dataset& data_;
  std::size_t max_depth_;
  std::size_t min_leaf_;
  std::size_t mtry_;
  std::mt19937_64 rng_;
  SplitCriterion criterion_;
  DecisionTree tree_;
  std::vector<std::size_t> all_features_;
};

}  // namespace

DecisionTree grow_tree(const Dataset& data, std::span<const std::size_t> rows, std::size_t max_depth,
                       std::size_t min_leaf, std::size_t mtry, std::uint64_t rng_seed, SplitCriterion criterion) {
  Grower grower(data, max_depth, min_leaf, mtry, rng_seed, criterion);
  return grower.grow(std::vector<std::size_t>(rows.begin(), rows.end()));
}

TrainedModel train_tree(const Dataset& data, const TreeConfig& config) {
  detail::require_trainable(data);
  require(config.min_leaf >= 1, ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
  std::vector<std::size_t> rows(data.n_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  DecisionTree tree = grow_tree(data, rows, config.max_depth, config.min_leaf, 0, config.seed, config.criterion);
  return TrainedModel(LearnerKind::Tree, data.feature_names, to_json(config), config.seed, std::move(tree));
}

TrainedModel train_forest(const Dataset& data, const ForestConfig& config) {
  detail::require_trainable(data);
  require(config.n_trees >= 1, ErrorCode::kInvalidArgument, "n_trees must be >= 1");
  require(config.min_leaf >= 1, ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
  const std::size_t n = data.n_rows();
  const std::size_t p = data.n_features();
  std::size_t mtry = config.mtry == 0
                         ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))))
                         : config.mtry;
  if (mtry >= p) mtry = 0;

  ForestModel forest;
  forest.trees.resize(config.n_trees);
  std::vector<std::vector<std::uint8_t>> in_bag(config.n_trees);

  auto train_one = [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(config.seed, t);
    std::vector<std::size_t> rows(n);
    std::vector<std::uint8_t> bag(n, 1);
    if (config.bootstrap) {
      std::mt19937_64 rng(tree_seed);
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      std::fill(bag.begin(), bag.end(), 0);
      for (std::size_t& r : rows) {
        r = draw(rng);
        bag[r] = 1;
      }
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees[t] = grow_tree(data, rows, config.max_depth, config.min_leaf, mtry, derive_seed(tree_seed, 1), config.criterion);
    in_bag[t] = std::move(bag);
  };

  std::size_t threads = config.threads == 0 ? std::thread::hardware_concurrency() : config.threads;
  threads = std::clamp<std::size_t>(threads, 1, config.n_trees);
  if (threads == 1) {
    for (std::size_t t = 0; t < config.n_trees; ++t) train_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < config.n_trees; t = next++) {
          try {
            train_one(t);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::size_t scored = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Distribution sum{};
    bool any = false;
    for (std::size_t t = 0; t < config.n_trees; ++t) {
      if (in_bag[t][i]) continue;
      const auto d = forest.trees[t].predict_proba(data.X[i]);
      for (std::size_t c = 0; c < kNumClasses; ++c) sum[c] += d[c];
      any = true;
    }
    if (!any) continue;
    ++scored;
    if (argmax(sum) == data.y[i]) ++correct;
  }
  if (scored > 0) forest.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  return TrainedModel(LearnerKind::Forest, data.feature_names, to_json(config), config.seed, std::move(forest));
}

}  // namespace qaexpert::learners
