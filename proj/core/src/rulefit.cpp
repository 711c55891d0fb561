#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "learner_support.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/io_util.hpp"
#include "qaexpert/learners.hpp"

namespace qaexpert::learners {

bool Rule::applies(Row row) const {
  for (const auto& c : conditions) {
    const double x = row[c.feature];
    if (c.less_equal ? !(x <= c.threshold) : !(x > c.threshold)) return false;
  }
  return true;
}

std::string Rule::describe(const std::vector<std::string>& feature_names) const {
  std::ostringstream out;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    const auto& c = conditions[i];
    if (i > 0) out << " AND ";
    const std::string name =
        c.feature < feature_names.size() ? feature_names[c.feature] : "x" + std::to_string(c.feature);
    out << name << (c.less_equal ? " <= " : " > ") << io::format_double(c.threshold);
  }
  return out.str();
}

std::vector<double> RuleFitModel::design_row(Row row) const {
  std::vector<double> d(rules.size() + linear.size());
  for (std::size_t k = 0; k < rules.size(); ++k) {
    d[k] = ((rules[k].applies(row) ? 1.0 : 0.0) - mean[k]) / scale[k];
  }
  for (std::size_t l = 0; l < linear.size(); ++l) {
    const std::size_t k = rules.size() + l;
    const double x = std::clamp(row[linear[l].feature], linear[l].lower, linear[l].upper);
    d[k] = (x - mean[k]) / scale[k];
  }
  return d;
}

namespace {

// Keeps the tightest bound per (feature, direction) and orders conditions.
Rule simplify(const std::vector<Condition>& path) {
  std::map<std::pair<std::size_t, bool>, double> tightest;
  for (const auto& c : path) {
    auto key = std::make_pair(c.feature, c.less_equal);
    auto it = tightest.find(key);
    if (it == tightest.end()) {
      tightest.emplace(key, c.threshold);
    } else {
      it->second = c.less_equal ? std::min(it->second, c.threshold) : std::max(it->second, c.threshold);
    }
  }
  Rule rule;
  for (const auto& [key, threshold] : tightest) rule.conditions.push_back(Condition{key.first, threshold, key.second});
  std::sort(rule.conditions.begin(), rule.conditions.end(), [](const Condition& a, const Condition& b) {
    return std::make_tuple(a.feature, !a.less_equal) < std::make_tuple(b.feature, !b.less_equal);
  });
  return rule;
}

void collect_rules(const DecisionTree& tree, std::size_t node, std::vector<Condition>& path, std::vector<Rule>& out) {
  const TreeNode& n = tree.nodes[node];
  if (n.feature < 0) return;
  const auto f = static_cast<std::size_t>(n.feature);
  for (bool go_left : {true, false}) {
    path.push_back(Condition{f, n.threshold, go_left});
    out.push_back(simplify(path));
    collect_rules(tree, static_cast<std::size_t>(go_left ? n.left : n.right), path, out);
    path.pop_back();
  }
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// L1-penalised binary logistic regression with an unpenalised intercept,
// solved by FISTA with backtracking.
void fit_l1_logistic(const std::vector<std::vector<double>>& z, const std::vector<double>& target, double lambda,
                     std::size_t max_iter, double tol, std::vector<double>& w, double& b) {
  const std::size_t n = z.size();
  const std::size_t k = w.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> margin(n);

  auto loss = [&](const std::vector<double>& ww, double bb) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = bb;
      for (std::size_t j = 0; j < k; ++j) s += ww[j] * z[i][j];
      margin[i] = s;
      total += log1pexp(s) - target[i] * s;
    }
    return total * inv_n;
  };
  auto gradient = [&](std::vector<double>& gw, double& gb) {
    std::fill(gw.begin(), gw.end(), 0.0);
    gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = sigmoid(margin[i]) - target[i];
      if (r == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) gw[j] += r * z[i][j];
      gb += r;
    }
    for (double& g : gw) g *= inv_n;
    gb *= inv_n;
  };

  std::vector<double> yw = w, gw(k), next_w(k);
  double yb = b, gb = 0.0;
  double t = 1.0;
  double lipschitz = 1.0;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const double f_y = loss(yw, yb);
    gradient(gw, gb);
    double next_b = yb;
    while (true) {
      const double threshold = lambda / lipschitz;
      double quad = f_y;
      double dist_sq = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double v = yw[j] - gw[j] / lipschitz;
        next_w[j] = v > threshold ? v - threshold : (v < -threshold ? v + threshold : 0.0);
        const double d = next_w[j] - yw[j];
        quad += gw[j] * d;
        dist_sq += d * d;
      }
      next_b = yb - gb / lipschitz;
      quad += gb * (next_b - yb);
      dist_sq += (next_b - yb) * (next_b - yb);
      quad += 0.5 * lipschitz * dist_sq;
      if (loss(next_w, next_b) <= quad + 1e-15 || lipschitz > 1e12) break;
      lipschitz *= 2.0;
    }
    double change = std::abs(next_b - b);
    for (std::size_t j = 0; j < k; ++j) change = std::max(change, std::abs(next_w[j] - w[j]));
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    for (std::size_t j = 0; j < k; ++j) yw[j] = next_w[j] + momentum * (next_w[j] - w[j]);
    yb = next_b + momentum * (next_b - b);
    w = next_w;
    b = next_b;
    t = t_next;
    if (change < tol) break;
  }
}

}  // namespace

TrainedModel train_rulefit(const Dataset& data, const RuleFitConfig& config) {
  detail::require_trainable(data);
  const std::size_t n = data.n_rows();
  const std::size_t p = data.n_features();
  std::size_t mtry = config.mtry == 0
                         ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))))
                         : config.mtry;
  if (mtry >= p) mtry = 0;
  const std::size_t sample_size =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(config.subsample * static_cast<double>(n))), 2, n);

  // Rule generation.
  std::vector<Rule> candidates;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(config.seed, t);
    std::vector<std::size_t> rows = all;
    std::mt19937_64 rng(tree_seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(sample_size);
    std::sort(rows.begin(), rows.end());
    const DecisionTree tree = grow_tree(data, rows, config.max_depth, 5, mtry, derive_seed(tree_seed, 1));
    std::vector<Condition> path;
    collect_rules(tree, 0, path, candidates);
  }

  RuleFitModel model;
  std::vector<std::vector<double>> columns;
  for (auto& rule : candidates) {
    if (std::find(model.rules.begin(), model.rules.end(), rule) != model.rules.end()) continue;
    std::vector<double> col(n);
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = rule.applies(data.X[i]) ? 1.0 : 0.0;
      support += col[i] > 0.0 ? 1 : 0;
    }
    if (support == 0 || support == n) continue;
    model.rules.push_back(std::move(rule));
    columns.push_back(std::move(col));
  }

  for (std::size_t f = 0; f < p; ++f) {
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = data.X[i][f];
    const double lower = quantile(values, config.winsor_quantile);
    const double upper = quantile(values, 1.0 - config.winsor_quantile);
    if (!(upper > lower)) continue;
    for (double& v : values) v = std::clamp(v, lower, upper);
    model.linear.push_back(LinearTerm{f, lower, upper});
    columns.push_back(std::move(values));
  }

  const std::size_t k = columns.size();
  for (const auto& col : columns) {
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    model.mean.push_back(mean);
    model.scale.push_back(sd > 0.0 ? sd : 1.0);
  }
  std::vector<std::vector<double>> z(n, std::vector<double>(k));
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) z[i][j] = (columns[j][i] - model.mean[j]) / model.scale[j];
  }

  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    model.coefficients[c].assign(k, 0.0);
    if (counts[c] == 0) {
      model.intercept[c] = std::log(0.5 / (static_cast<double>(n) + 0.5));
      continue;
    }
    const double prior = static_cast<double>(counts[c]) / static_cast<double>(n);
    double b = std::log(prior / (1.0 - prior));
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = index(data.y[i]) == c ? 1.0 : 0.0;
    fit_l1_logistic(z, target, config.l1_penalty, config.max_iter, config.tol, model.coefficients[c], b);
    model.intercept[c] = b;
  }
  return TrainedModel(LearnerKind::RuleFit, data.feature_names, to_json(config), config.seed, std::move(model));
}

}  // namespace qaexpert::learners
