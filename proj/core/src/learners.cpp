#include "qaexpert/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <type_traits>

#include "qaexpert/error.hpp"
#include "qaexpert/io_util.hpp"
#include "learner_support.hpp"

namespace qaexpert::learners {

using nlohmann::json;

void Dataset::validate() const {
  require(X.size() == y.size(), ErrorCode::kInvalidArgument, "dataset rows and labels differ in count");
  for (std::size_t i = 0; i < X.size(); ++i) {
    require(X[i].size() == feature_names.size(), ErrorCode::kInvalidArgument,
            "dataset row " + std::to_string(i) + " has the wrong width");
    for (double v : X[i]) {
      require(std::isfinite(v), ErrorCode::kInvalidArgument,
              "dataset row " + std::to_string(i) + " contains a non-finite value");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.feature_names = feature_names;
  out.X.reserve(rows.size());
  out.y.reserve(rows.size());
  for (std::size_t r : rows) {
    out.X.push_back(X.at(r));
    out.y.push_back(y.at(r));
  }
  return out;
}

Dataset Dataset::select_columns(std::span<const std::size_t> columns) const {
  Dataset out;
  out.y = y;
  for (std::size_t c : columns) out.feature_names.push_back(feature_names.at(c));
  out.X.reserve(X.size());
  for (const auto& row : X) {
    std::vector<double> r;
    r.reserve(columns.size());
    for (std::size_t c : columns) r.push_back(row[c]);
    out.X.push_back(std::move(r));
  }
  return out;
}

std::array<std::size_t, kNumClasses> Dataset::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (Label l : y) ++counts[index(l)];
  return counts;
}

Label argmax(const Distribution& distribution) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (distribution[c] > distribution[best]) best = c;
  }
  return label_from_code(static_cast<int>(best));
}

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::Logistic: return "logistic";
    case LearnerKind::Tree: return "tree";
    case LearnerKind::Forest: return "forest";
    case LearnerKind::RuleFit: return "rulefit";
    case LearnerKind::Majority: return "majority";
  }
  return "unknown";
}

LearnerKind parse_kind(std::string_view text) {
  if (text == "logistic" || text == "lr") return LearnerKind::Logistic;
  if (text == "tree" || text == "dt") return LearnerKind::Tree;
  if (text == "forest" || text == "rf") return LearnerKind::Forest;
  if (text == "rulefit") return LearnerKind::RuleFit;
  if (text == "majority") return LearnerKind::Majority;
  fail(ErrorCode::kInvalidArgument, "unknown learner '" + std::string(text) + "'");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Hyperparameter JSON

namespace {

void check_keys(const json& params, std::initializer_list<std::string_view> allowed, std::string_view what) {
  require(params.is_object(), ErrorCode::kInvalidArgument, std::string(what) + " parameters must be an object");
  for (const auto& [key, value] : params.items()) {
    const bool known = std::find(allowed.begin(), allowed.end(), key) != allowed.end();
    require(known, ErrorCode::kInvalidArgument, "unknown " + std::string(what) + " parameter '" + key + "'");
  }
}

template <typename T>
void read(const json& params, const char* key, T& target) {
  if (!params.contains(key)) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    require(params.at(key).is_number_integer() && params.at(key).template get<std::int64_t>() >= 0, ErrorCode::kInvalidArgument,
            std::string("parameter '") + key + "' must be a non-negative integer");
  }
  try {
    target = params.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kInvalidArgument, std::string("parameter '") + key + "' has the wrong type");
  }
}

SplitCriterion parse_criterion(const json& params, SplitCriterion fallback) {
  if (!params.contains("criterion")) return fallback;
  const std::string name = params.at("criterion").get<std::string>();
  if (name == "gini") return SplitCriterion::Gini;
  if (name == "entropy") return SplitCriterion::Entropy;
  fail(ErrorCode::kInvalidArgument, "unknown split criterion '" + name + "'");
}

const char* criterion_name(SplitCriterion c) { return c == SplitCriterion::Gini ? "gini" : "entropy"; }

}  // namespace

LogisticConfig logistic_config(const json& params) {
  check_keys(params, {"l2_penalty", "max_iter", "tol", "seed"}, "logistic");
  LogisticConfig c;
  read(params, "l2_penalty", c.l2_penalty);
  read(params, "max_iter", c.max_iter);
  read(params, "tol", c.tol);
  read(params, "seed", c.seed);
  require(c.l2_penalty >= 0.0, ErrorCode::kInvalidArgument, "l2_penalty must be >= 0");
  return c;
}

TreeConfig tree_config(const json& params) {
  check_keys(params, {"max_depth", "min_leaf", "seed", "criterion"}, "tree");
  TreeConfig c;
  read(params, "max_depth", c.max_depth);
  read(params, "min_leaf", c.min_leaf);
  read(params, "seed", c.seed);
  c.criterion = parse_criterion(params, c.criterion);
  require(c.min_leaf >= 1, ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
  return c;
}

ForestConfig forest_config(const json& params) {
  check_keys(params, {"n_trees", "max_depth", "min_leaf", "mtry", "bootstrap", "seed", "threads", "criterion"},
             "forest");
  ForestConfig c;
  read(params, "n_trees", c.n_trees);
  read(params, "max_depth", c.max_depth);
  read(params, "min_leaf", c.min_leaf);
  read(params, "mtry", c.mtry);
  read(params, "bootstrap", c.bootstrap);
  read(params, "seed", c.seed);
  read(params, "threads", c.threads);
  c.criterion = parse_criterion(params, c.criterion);
  require(c.n_trees >= 1, ErrorCode::kInvalidArgument, "n_trees must be >= 1");
  require(c.min_leaf >= 1, ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
  return c;
}

RuleFitConfig rulefit_config(const json& params) {
  check_keys(params,
             {"n_trees", "max_depth", "l1_penalty", "subsample", "mtry", "winsor_quantile", "max_iter", "tol", "seed"},
             "rulefit");
  RuleFitConfig c;
  read(params, "n_trees", c.n_trees);
  read(params, "max_depth", c.max_depth);
  read(params, "l1_penalty", c.l1_penalty);
  read(params, "subsample", c.subsample);
  read(params, "mtry", c.mtry);
  read(params, "winsor_quantile", c.winsor_quantile);
  read(params, "max_iter", c.max_iter);
  read(params, "tol", c.tol);
  read(params, "seed", c.seed);
  require(c.l1_penalty >= 0.0, ErrorCode::kInvalidArgument, "l1_penalty must be >= 0");
  require(c.subsample > 0.0 && c.subsample <= 1.0, ErrorCode::kInvalidArgument, "subsample must be in (0, 1]");
  require(c.winsor_quantile >= 0.0 && c.winsor_quantile < 0.5, ErrorCode::kInvalidArgument,
          "winsor_quantile must be in [0, 0.5)");
  return c;
}

json to_json(const LogisticConfig& c) {
  return json{{"l2_penalty", c.l2_penalty}, {"max_iter", c.max_iter}, {"tol", c.tol}, {"seed", c.seed}};
}

json to_json(const TreeConfig& c) {
  return json{{"max_depth", c.max_depth},
              {"min_leaf", c.min_leaf},
              {"seed", c.seed},
              {"criterion", criterion_name(c.criterion)}};
}

json to_json(const ForestConfig& c) {
  return json{{"n_trees", c.n_trees},   {"max_depth", c.max_depth}, {"min_leaf", c.min_leaf},
              {"mtry", c.mtry},         {"bootstrap", c.bootstrap}, {"seed", c.seed},
              {"threads", c.threads},   {"criterion", criterion_name(c.criterion)}};
}

json to_json(const RuleFitConfig& c) {
  return json{{"n_trees", c.n_trees},     {"max_depth", c.max_depth}, {"l1_penalty", c.l1_penalty},
              {"subsample", c.subsample}, {"mtry", c.mtry},           {"winsor_quantile", c.winsor_quantile},
              {"max_iter", c.max_iter},   {"tol", c.tol},             {"seed", c.seed}};
}

TrainedModel train(const Dataset& data, const LearnerSpec& spec) {
  switch (spec.kind) {
    case LearnerKind::Logistic: return train_logistic(data, logistic_config(spec.params));
    case LearnerKind::Tree: return train_tree(data, tree_config(spec.params));
    case LearnerKind::Forest: return train_forest(data, forest_config(spec.params));
    case LearnerKind::RuleFit: return train_rulefit(data, rulefit_config(spec.params));
    case LearnerKind::Majority:
      check_keys(spec.params, {}, "majority");
      return train_majority(data);
  }
  fail(ErrorCode::kInternal, "unhandled learner kind");
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace detail {

void require_trainable(const Dataset& data) {
  data.validate();
  require(data.n_rows() > 0, ErrorCode::kInvalidArgument, "dataset is empty");
  const auto counts = data.class_counts();
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  require(present >= 2, ErrorCode::kPrecondition, "training needs at least two classes present");
}

}  // namespace detail

namespace {

Distribution softmax(const Distribution& z) {
  const double top = *std::max_element(z.begin(), z.end());
  Distribution p{};
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p[c] = std::exp(z[c] - top);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

Distribution logistic_scores(const LogisticModel& m, Row row) {
  Distribution z = m.bias;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double x = (row[j] - m.mean[j]) / m.scale[j];
    for (std::size_t c = 0; c < kNumClasses; ++c) z[c] += m.weights[c][j] * x;
  }
  return z;
}

}  // namespace

TrainedModel train_logistic(const Dataset& data, const LogisticConfig& config) {
  detail::require_trainable(data);
  const std::size_t n = data.n_rows();
  const std::size_t p = data.n_features();
  LogisticModel m;
  m.mean.assign(p, 0.0);
  m.scale.assign(p, 1.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0;
    for (const auto& row : data.X) sum += row[j];
    m.mean[j] = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& row : data.X) ss += (row[j] - m.mean[j]) * (row[j] - m.mean[j]);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    m.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  std::vector<std::vector<double>> z(n, std::vector<double>(p));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) z[i][j] = (data.X[i][j] - m.mean[j]) / m.scale[j];
  }
  for (auto& w : m.weights) w.assign(p, 0.0);

  // Parameters packed as [w_0 (p), w_1 (p), w_2 (p), b (3)].
  const std::size_t dim = kNumClasses * (p + 1);
  std::vector<double> theta(dim, 0.0);
  auto objective = [&](const std::vector<double>& t, std::vector<double>* grad) {
    double loss = 0.0;
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      Distribution s{};
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        double v = t[kNumClasses * p + c];
        const double* w = &t[c * p];
        for (std::size_t j = 0; j < p; ++j) v += w[j] * z[i][j];
        s[c] = v;
      }
      const double top = *std::max_element(s.begin(), s.end());
      double sum = 0.0;
      for (double v : s) sum += std::exp(v - top);
      const double log_norm = top + std::log(sum);
      const std::size_t yi = index(data.y[i]);
      loss += log_norm - s[yi];
      if (grad) {
        for (std::size_t c = 0; c < kNumClasses; ++c) {
          const double r = std::exp(s[c] - log_norm) - (c == yi ? 1.0 : 0.0);
          double* g = &(*grad)[c * p];
          for (std::size_t j = 0; j < p; ++j) g[j] += r * z[i][j];
          (*grad)[kNumClasses * p + c] += r;
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    double penalty = 0.0;
    for (std::size_t k = 0; k < kNumClasses * p; ++k) penalty += t[k] * t[k];
    loss += 0.5 * config.l2_penalty * penalty;
    if (grad) {
      for (std::size_t k = 0; k < dim; ++k) (*grad)[k] *= inv_n;
      for (std::size_t k = 0; k < kNumClasses * p; ++k) (*grad)[k] += config.l2_penalty * t[k];
    }
    return loss;
  };

  std::vector<double> grad(dim), candidate(dim);
  double loss = objective(theta, &grad);
  double step = 1.0;
  std::size_t iter = 0;
  for (; iter < config.max_iter; ++iter) {
    double gnorm_sq = 0.0;
    for (double g : grad) gnorm_sq += g * g;
    if (std::sqrt(gnorm_sq) < config.tol) break;
    step = std::min(step * 2.0, 1e4);
    // Armijo backtracking.
    while (true) {
      for (std::size_t k = 0; k < dim; ++k) candidate[k] = theta[k] - step * grad[k];
      const double next = objective(candidate, nullptr);
      if (next <= loss - 1e-4 * step * gnorm_sq || step < 1e-12) break;
      step *= 0.5;
    }
    if (step < 1e-12) break;
    theta.swap(candidate);
    loss = objective(theta, &grad);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::copy(theta.begin() + static_cast<std::ptrdiff_t>(c * p),
              theta.begin() + static_cast<std::ptrdiff_t>((c + 1) * p), m.weights[c].begin());
    m.bias[c] = theta[kNumClasses * p + c];
  }
  m.iterations = iter;
  return TrainedModel(LearnerKind::Logistic, data.feature_names, to_json(config), config.seed, std::move(m));
}

TrainedModel train_majority(const Dataset& data) {
  data.validate();
  require(data.n_rows() > 0, ErrorCode::kInvalidArgument, "dataset is empty");
  MajorityModel m;
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    m.priors[c] = static_cast<double>(counts[c]) / static_cast<double>(data.n_rows());
  }
  return TrainedModel(LearnerKind::Majority, data.feature_names, json::object(), 0, m);
}

// ---------------------------------------------------------------------------
// Uniform model contract

TrainedModel::TrainedModel(LearnerKind kind, std::vector<std::string> feature_names, json config,
                           std::uint64_t seed, ModelParameters parameters)
    : kind_(kind),
      feature_names_(std::move(feature_names)),
      config_(std::move(config)),
      seed_(seed),
      parameters_(std::move(parameters)) {}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Distribution normalized(Distribution d) {
  double sum = 0.0;
  for (double v : d) sum += v;
  if (!(sum > 0.0)) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  for (double& v : d) v /= sum;
  return d;
}

Distribution rulefit_proba(const RuleFitModel& m, Row row) {
  const std::vector<double> design = m.design_row(row);
  Distribution p{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double z = m.intercept[c];
    for (std::size_t k = 0; k < design.size(); ++k) z += m.coefficients[c][k] * design[k];
    p[c] = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return normalized(p);
}

std::vector<double> normalize_importance(std::vector<double> raw) {
  double sum = 0.0;
  for (double v : raw) sum += v;
  if (!(sum > 0.0)) {
    std::fill(raw.begin(), raw.end(), raw.empty() ? 0.0 : 1.0 / static_cast<double>(raw.size()));
    return raw;
  }
  for (double& v : raw) v /= sum;
  return raw;
}

}  // namespace

Distribution TrainedModel::predict_proba(Row row) const {
  require(row.size() == n_features(), ErrorCode::kInvalidArgument,
          "row has " + std::to_string(row.size()) + " features, model expects " + std::to_string(n_features()));
  return std::visit(
      Overloaded{
          [&](const LogisticModel& m) { return softmax(logistic_scores(m, row)); },
          [&](const DecisionTree& t) { return t.predict_proba(row); },
          [&](const ForestModel& f) {
            Distribution sum{};
            for (const auto& t : f.trees) {
              const auto d = t.predict_proba(row);
              for (std::size_t c = 0; c < kNumClasses; ++c) sum[c] += d[c];
            }
            return normalized(sum);
          },
          [&](const RuleFitModel& m) { return rulefit_proba(m, row); },
          [&](const MajorityModel& m) { return m.priors; },
      },
      parameters_);
}

std::vector<Distribution> TrainedModel::predict_proba(const std::vector<std::vector<double>>& rows) const {
  std::vector<Distribution> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict_proba(r));
  return out;
}

std::vector<Label> TrainedModel::predict(const std::vector<std::vector<double>>& rows) const {
  std::vector<Label> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict(r));
  return out;
}

std::vector<double> TrainedModel::feature_importances() const {
  const std::size_t p = n_features();
  return std::visit(
      Overloaded{
          [&](const LogisticModel& m) {
            std::vector<double> raw(p, 0.0);
            for (std::size_t c = 0; c < kNumClasses; ++c) {
              for (std::size_t j = 0; j < p; ++j) raw[j] += std::abs(m.weights[c][j]);
            }
            return normalize_importance(raw);
          },
          [&](const DecisionTree& t) { return normalize_importance(t.impurity_decrease); },
          [&](const ForestModel& f) {
            std::vector<double> raw(p, 0.0);
            for (const auto& t : f.trees) {
              const auto imp = normalize_importance(t.impurity_decrease);
              double sum = 0.0;
              for (double v : t.impurity_decrease) sum += v;
              if (!(sum > 0.0)) continue;  // a stump carries no attribution
              for (std::size_t j = 0; j < p; ++j) raw[j] += imp[j];
            }
            return normalize_importance(raw);
          },
          [&](const RuleFitModel& m) {
            std::vector<double> raw(p, 0.0);
            for (std::size_t k = 0; k < m.rules.size(); ++k) {
              double mass = 0.0;
              for (std::size_t c = 0; c < kNumClasses; ++c) mass += std::abs(m.coefficients[c][k]);
              std::set<std::size_t> features;
              for (const auto& cond : m.rules[k].conditions) features.insert(cond.feature);
              for (std::size_t f : features) raw[f] += mass / static_cast<double>(features.size());
            }
            for (std::size_t l = 0; l < m.linear.size(); ++l) {
              const std::size_t k = m.rules.size() + l;
              for (std::size_t c = 0; c < kNumClasses; ++c) raw[m.linear[l].feature] += std::abs(m.coefficients[c][k]);
            }
            return normalize_importance(raw);
          },
          [&](const MajorityModel&) { return normalize_importance(std::vector<double>(p, 0.0)); },
      },
      parameters_);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kModelFormat = "qaexpert-model";
constexpr int kModelVersion = 1;

json tree_to_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back(json{{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"distribution", n.distribution},
                         {"n", n.n_samples},
                         {"impurity", n.impurity}});
  }
  return json{{"nodes", nodes}, {"impurity_decrease", t.impurity_decrease}};
}

DecisionTree tree_from_json(const json& j) {
  DecisionTree t;
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.feature = n.at("feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.distribution = n.at("distribution").get<Distribution>();
    node.n_samples = n.at("n").get<std::size_t>();
    node.impurity = n.at("impurity").get<double>();
    t.nodes.push_back(node);
  }
  t.impurity_decrease = j.at("impurity_decrease").get<std::vector<double>>();
  const auto size = static_cast<int>(t.nodes.size());
  require(size > 0, ErrorCode::kInvalidArgument, "model file: empty tree");
  for (const auto& n : t.nodes) {
    if (n.feature >= 0) {
      require(n.left > 0 && n.left < size && n.right > 0 && n.right < size, ErrorCode::kInvalidArgument,
              "model file: tree child index out of range");
    }
  }
  return t;
}

json rule_to_json(const Rule& r) {
  json conds = json::array();
  for (const auto& c : r.conditions) conds.push_back(json{c.feature, c.less_equal ? "<=" : ">", c.threshold});
  return conds;
}

Rule rule_from_json(const json& j) {
  Rule r;
  for (const auto& c : j) {
    Condition cond;
    cond.feature = c.at(0).get<std::size_t>();
    const auto op = c.at(1).get<std::string>();
    require(op == "<=" || op == ">", ErrorCode::kInvalidArgument, "model file: bad rule operator");
    cond.less_equal = op == "<=";
    cond.threshold = c.at(2).get<double>();
    r.conditions.push_back(cond);
  }
  return r;
}

json parameters_to_json(const ModelParameters& params) {
  return std::visit(
      Overloaded{
          [](const LogisticModel& m) {
            return json{{"mean", m.mean}, {"scale", m.scale}, {"weights", m.weights}, {"bias", m.bias},
                        {"iterations", m.iterations}};
          },
          [](const DecisionTree& t) { return tree_to_json(t); },
          [](const ForestModel& f) {
            json trees = json::array();
            for (const auto& t : f.trees) trees.push_back(tree_to_json(t));
            return json{{"trees", trees}, {"oob_accuracy", f.oob_accuracy}};
          },
          [](const RuleFitModel& m) {
            json rules = json::array();
            for (const auto& r : m.rules) rules.push_back(rule_to_json(r));
            json linear = json::array();
            for (const auto& l : m.linear) linear.push_back(json{l.feature, l.lower, l.upper});
            return json{{"rules", rules},         {"linear", linear},
                        {"mean", m.mean},         {"scale", m.scale},
                        {"coefficients", m.coefficients}, {"intercept", m.intercept}};
          },
          [](const MajorityModel& m) { return json{{"priors", m.priors}}; },
      },
      params);
}

ModelParameters parameters_from_json(LearnerKind kind, const json& j, std::size_t p) {
  switch (kind) {
    case LearnerKind::Logistic: {
      LogisticModel m;
      m.mean = j.at("mean").get<std::vector<double>>();
      m.scale = j.at("scale").get<std::vector<double>>();
      m.weights = j.at("weights").get<std::array<std::vector<double>, kNumClasses>>();
      m.bias = j.at("bias").get<Distribution>();
      m.iterations = j.at("iterations").get<std::size_t>();
      bool ok = m.mean.size() == p && m.scale.size() == p;
      for (const auto& w : m.weights) ok = ok && w.size() == p;
      require(ok, ErrorCode::kInvalidArgument, "model file: logistic parameters have the wrong width");
      return m;
    }
    case LearnerKind::Tree: return tree_from_json(j);
    case LearnerKind::Forest: {
      ForestModel f;
      for (const auto& t : j.at("trees")) f.trees.push_back(tree_from_json(t));
      f.oob_accuracy = j.at("oob_accuracy").get<double>();
      return f;
    }
    case LearnerKind::RuleFit: {
      RuleFitModel m;
      for (const auto& r : j.at("rules")) m.rules.push_back(rule_from_json(r));
      for (const auto& l : j.at("linear")) {
        m.linear.push_back(LinearTerm{l.at(0).get<std::size_t>(), l.at(1).get<double>(), l.at(2).get<double>()});
      }
      m.mean = j.at("mean").get<std::vector<double>>();
      m.scale = j.at("scale").get<std::vector<double>>();
      m.coefficients = j.at("coefficients").get<std::array<std::vector<double>, kNumClasses>>();
      m.intercept = j.at("intercept").get<Distribution>();
      const std::size_t width = m.rules.size() + m.linear.size();
      bool ok = m.mean.size() == width && m.scale.size() == width;
      for (const auto& c : m.coefficients) ok = ok && c.size() == width;
      require(ok, ErrorCode::kInvalidArgument, "model file: rulefit parameters have the wrong width");
      return m;
    }
    case LearnerKind::Majority: {
      MajorityModel m;
      m.priors = j.at("priors").get<Distribution>();
      return m;
    }
  }
  fail(ErrorCode::kInternal, "unhandled learner kind");
}

}  // namespace

json TrainedModel::to_json() const {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["kind"] = std::string(learners::to_string(kind_));
  j["feature_names"] = feature_names_;
  j["config"] = config_;
  j["seed"] = seed_;
  j["parameters"] = parameters_to_json(parameters_);
  return j;
}

TrainedModel TrainedModel::from_json(const json& j) {
  try {
    require(j.at("format").get<std::string>() == kModelFormat, ErrorCode::kInvalidArgument,
            "not a qaexpert model file");
    const int version = j.at("version").get<int>();
    require(version == kModelVersion, ErrorCode::kInvalidArgument,
            "unsupported model file version " + std::to_string(version));
    const LearnerKind kind = parse_kind(j.at("kind").get<std::string>());
    auto names = j.at("feature_names").get<std::vector<std::string>>();
    auto params = parameters_from_json(kind, j.at("parameters"), names.size());
    return TrainedModel(kind, std::move(names), j.at("config"), j.at("seed").get<std::uint64_t>(),
                        std::move(params));
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed model file: ") + e.what());
  }
}

void TrainedModel::save(const std::filesystem::path& path) const { io::write_text_file(path, to_json().dump()); }

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  const std::string text = io::read_text_file(path);
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), ErrorCode::kInvalidArgument, "model file is not valid JSON: " + path.string());
  return from_json(j);
}

}  // namespace qaexpert::learners
