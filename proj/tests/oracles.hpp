#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qaexpert/labels.hpp"
#include "qaexpert/learners.hpp"

// Independent reference computations shared by the unit and acceptance suites.
namespace qaexpert::testing {

// Textbook one-way ANOVA F via sums of squares around the grand mean.
inline double anova_f_oracle(const std::vector<std::vector<double>>& groups) {
  double total = 0.0, count = 0.0;
  for (const auto& g : groups) {
    for (double v : g) {
      total += v;
      count += 1.0;
    }
  }
  const double grand = total / count;
  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ssw += (v - mean) * (v - mean);
  }
  const double k = static_cast<double>(groups.size());
  return (ssb / (k - 1.0)) / (ssw / (count - k));
}

// Cohen's kappa from marginal proportions.
inline double kappa_oracle(const std::vector<Label>& a, const std::vector<Label>& b) {
  const double n = static_cast<double>(a.size());
  double po = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) po += a[i] == b[i] ? 1.0 : 0.0;
  po /= n;
  for (Label c : kAllLabels) {
    double ca = 0.0, cb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ca += a[i] == c ? 1.0 : 0.0;
      cb += b[i] == c ? 1.0 : 0.0;
    }
    pe += (ca / n) * (cb / n);
  }
  return pe == 1.0 ? 1.0 : (po - pe) / (1.0 - pe);
}

inline double gini(const std::vector<Label>& ys) {
  if (ys.empty()) return 0.0;
  double g = 1.0;
  for (Label c : kAllLabels) {
    const double p = static_cast<double>(std::count(ys.begin(), ys.end(), c)) / static_cast<double>(ys.size());
    g -= p * p;
  }
  return g;
}

struct BruteSplit {
  bool found = false;
  double threshold = 0.0;
  double weighted_gini = 0.0;  // size-weighted child impurity
  std::size_t n_minimisers = 0;  // thresholds within 1e-9 of the best
};

// Tries every midpoint between consecutive distinct values and partitions the
// rows by direct comparison.
inline BruteSplit brute_force_split(const std::vector<double>& x, const std::vector<Label>& y, std::size_t min_leaf) {
  std::vector<double> values = x;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const double parent = gini(y) * static_cast<double>(y.size());
  std::vector<std::pair<double, double>> candidates;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double t = 0.5 * (values[i] + values[i + 1]);
    std::vector<Label> left, right;
    for (std::size_t r = 0; r < x.size(); ++r) (x[r] <= t ? left : right).push_back(y[r]);
    if (left.size() < min_leaf || right.size() < min_leaf) continue;
    const double score = gini(left) * static_cast<double>(left.size()) + gini(right) * static_cast<double>(right.size());
    candidates.emplace_back(t, score);
  }
  BruteSplit best;
  for (const auto& [t, score] : candidates) {
    if (score < parent - 1e-9 && (!best.found || score < best.weighted_gini)) {
      best.found = true;
      best.threshold = t;
      best.weighted_gini = score;
    }
  }
  if (best.found) {
    for (const auto& [t, score] : candidates) best.n_minimisers += std::abs(score - best.weighted_gini) < 1e-9;
  }
  return best;
}

// 600 rows, 30 columns, three classes of 240/210/150. Column 7 carries the
// class almost noise-free, columns 0..2 weakly, the rest are noise.
inline learners::Dataset planted_dataset(std::uint64_t seed, std::size_t planted_column = 7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  learners::Dataset d;
  for (std::size_t j = 0; j < 30; ++j) d.feature_names.push_back("f" + std::to_string(j));
  const std::size_t sizes[3] = {240, 210, 150};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      std::vector<double> row(30);
      for (auto& v : row) v = noise(rng);
      for (std::size_t j = 0; j < 3; ++j) row[j] += 0.4 * static_cast<double>(c);
      row[planted_column] = 3.0 * static_cast<double>(c) + 0.4 * noise(rng);
      d.X.push_back(std::move(row));
      d.y.push_back(label_from_code(static_cast<int>(c)));
    }
  }
  // Interleave classes so row order carries no signal.
  std::vector<std::size_t> order(d.X.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  return d.subset(order);
}

}  // namespace qaexpert::testing
