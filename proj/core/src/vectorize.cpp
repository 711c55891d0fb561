#include "qaexpert/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "qaexpert/error.hpp"

namespace qaexpert::vectorize {

using nlohmann::json;

double SparseVector::norm() const {
  double sum = 0.0;
  for (const auto& [i, v] : entries) sum += v * v;
  return std::sqrt(sum);
}

TfidfModel TfidfModel::fit(const std::vector<std::vector<std::string>>& documents, IdfMode mode) {
  require(!documents.empty(), ErrorCode::kInvalidArgument, "TF-IDF needs at least one document");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    std::vector<std::string> unique(doc.begin(), doc.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (auto& term : unique) ++df[term];
  }
  TfidfModel model;
  model.mode_ = mode;
  model.n_documents_ = documents.size();
  const auto n = static_cast<double>(documents.size());
  for (const auto& [term, count] : df) {
    model.index_.emplace(term, static_cast<std::uint32_t>(model.terms_.size()));
    model.terms_.push_back(term);
    model.df_.push_back(count);
    const auto d = static_cast<double>(count);
    model.idf_.push_back(mode == IdfMode::Classic ? std::log(n / d) : std::log((1.0 + n) / (1.0 + d)) + 1.0);
  }
  return model;
}

SparseVector TfidfModel::transform(std::span<const std::string> tokens) const {
  std::map<std::uint32_t, double> tf;
  for (const auto& t : tokens) {
    if (auto idx = index_of(t)) tf[*idx] += 1.0;
  }
  SparseVector v;
  double sum_sq = 0.0;
  for (const auto& [idx, count] : tf) {
    const double w = count * idf_[idx];
    if (w == 0.0) continue;
    v.entries.emplace_back(idx, w);
    sum_sq += w * w;
  }
  if (sum_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sum_sq);
    for (auto& [idx, w] : v.entries) w *= inv;
  }
  return v;
}

std::optional<std::uint32_t> TfidfModel::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double TfidfModel::idf(std::string_view term) const {
  auto idx = index_of(term);
  require(idx.has_value(), ErrorCode::kNotFound, "term not in vocabulary: " + std::string(term));
  return idf_[*idx];
}

std::size_t TfidfModel::document_frequency(std::string_view term) const {
  auto idx = index_of(term);
  return idx ? df_[*idx] : 0;
}

json TfidfModel::to_json() const {
  json j;
  j["idf_mode"] = mode_ == IdfMode::Classic ? "classic" : "smoothed";
  j["n_documents"] = n_documents_;
  j["terms"] = terms_;
  j["document_frequency"] = df_;
  return j;
}

TfidfModel TfidfModel::from_json(const json& j) {
  TfidfModel model;
  const std::string mode = j.at("idf_mode").get<std::string>();
  require(mode == "classic" || mode == "smoothed", ErrorCode::kInvalidArgument, "unknown idf_mode " + mode);
  model.mode_ = mode == "classic" ? IdfMode::Classic : IdfMode::Smoothed;
  model.n_documents_ = j.at("n_documents").get<std::size_t>();
  model.terms_ = j.at("terms").get<std::vector<std::string>>();
  model.df_ = j.at("document_frequency").get<std::vector<std::size_t>>();
  require(model.terms_.size() == model.df_.size(), ErrorCode::kInvalidArgument, "corrupt TF-IDF model");
  const auto n = static_cast<double>(model.n_documents_);
  for (std::size_t i = 0; i < model.terms_.size(); ++i) {
    model.index_.emplace(model.terms_[i], static_cast<std::uint32_t>(i));
    const auto d = static_cast<double>(model.df_[i]);
    model.idf_.push_back(model.mode_ == IdfMode::Classic ? std::log(n / d)
                                                         : std::log((1.0 + n) / (1.0 + d)) + 1.0);
  }
  return model;
}

double MarginModel::decision(const SparseVector& x) const {
  double f = bias;
  for (const auto& [idx, v] : x.entries) {
    if (idx < weights.size()) f += weights[idx] * v;
  }
  return f;
}

json MarginModel::to_json() const {
  return json{{"weights", weights}, {"bias", bias}, {"calibration", {calibration_a, calibration_b}}};
}

MarginModel MarginModel::from_json(const json& j) {
  MarginModel m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.calibration_a = j.at("calibration").at(0).get<double>();
  m.calibration_b = j.at("calibration").at(1).get<double>();
  return m;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double expert_probability(const MarginModel& model, const SparseVector& x) {
  return sigmoid(model.calibration_a * model.decision(x) + model.calibration_b);
}

MarginModel fit_margin_weights(std::span<const SparseVector> vectors, const std::vector<bool>& is_positive,
                               std::size_t dimension, const MarginConfig& config) {
  require(vectors.size() == is_positive.size(), ErrorCode::kInvalidArgument, "vectors/labels size mismatch");
  const std::size_t n = vectors.size();
  const auto positives = static_cast<std::size_t>(std::count(is_positive.begin(), is_positive.end(), true));
  require(positives > 0 && positives < n, ErrorCode::kPrecondition,
          "margin classifier needs both classes present");
  require(config.lambda > 0.0, ErrorCode::kInvalidArgument, "lambda must be positive");

  // w = scale * v, with v[dimension] holding the intercept.
  std::vector<double> v(dimension + 1, 0.0);
  double scale = 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (config.lambda * static_cast<double>(t));
      const double y = is_positive[i] ? 1.0 : -1.0;
      double dot = v[dimension];
      for (const auto& [idx, x] : vectors[i].entries) dot += v[idx] * x;
      const double margin = y * scale * dot;

      scale *= 1.0 - eta * config.lambda;
      if (scale == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
      } else if (scale < 1e-9) {
        for (double& value : v) value *= scale;
        scale = 1.0;
      }
      if (margin < 1.0) {
        const double step = eta * y / scale;
        for (const auto& [idx, x] : vectors[i].entries) v[idx] += step * x;
        v[dimension] += step;
      }
    }
  }
  MarginModel model;
  model.weights.resize(dimension);
  for (std::size_t j = 0; j < dimension; ++j) model.weights[j] = scale * v[j];
  model.bias = scale * v[dimension];
  return model;
}

std::pair<double, double> fit_platt(std::span<const double> decisions, const std::vector<bool>& is_positive) {
  require(decisions.size() == is_positive.size() && !decisions.empty(), ErrorCode::kInvalidArgument,
          "platt scaling needs matching, non-empty inputs");
  const double n_pos = static_cast<double>(std::count(is_positive.begin(), is_positive.end(), true));
  const double n_neg = static_cast<double>(decisions.size()) - n_pos;
  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);

  // Minimise cross-entropy of sigmoid(a f + b) against smoothed targets.
  double a = 0.0;
  double b = std::log((n_pos + 1.0) / (n_neg + 1.0));
  auto objective = [&](double aa, double bb) {
    double total = 0.0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const double z = aa * decisions[i] + bb;
      const double target = is_positive[i] ? hi : lo;
      // log(1 + e^z) - target * z, computed stably
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      total += softplus - target * z;
    }
    return total;
  };
  double current = objective(a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double ga = 0, gb = 0, haa = 1e-12, hab = 0, hbb = 1e-12;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const double f = decisions[i];
      const double p = sigmoid(a * f + b);
      const double d = p - (is_positive[i] ? hi : lo);
      const double w = p * (1.0 - p);
      ga += d * f;
      gb += d;
      haa += w * f * f;
      hab += w * f;
      hbb += w;
    }
    if (std::abs(ga) < 1e-10 && std::abs(gb) < 1e-10) break;
    const double det = haa * hbb - hab * hab;
    const double da = -(hbb * ga - hab * gb) / det;
    const double db = -(-hab * ga + haa * gb) / det;
    double step = 1.0;
    bool improved = false;
    while (step > 1e-10) {
      const double candidate = objective(a + step * da, b + step * db);
      if (candidate < current + 1e-4 * step * (ga * da + gb * db)) {
        a += step * da;
        b += step * db;
        current = candidate;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  // A non-positive slope would break monotonicity; keep the map increasing.
  if (!(a > 1e-6)) a = 1e-6;
  return {a, b};
}

MarginModel train_margin_classifier(std::span<const SparseVector> vectors, const std::vector<bool>& is_positive,
                                    std::size_t dimension, const MarginConfig& config) {
  MarginModel model = fit_margin_weights(vectors, is_positive, dimension, config);

  const std::size_t n = vectors.size();
  const std::size_t k = std::max<std::size_t>(2, config.calibration_folds);
  // Deterministic stratified assignment: interleave each class over the folds.
  std::vector<std::size_t> fold(n);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  for (bool cls : {true, false}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_positive[i] == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t r = 0; r < members.size(); ++r) fold[members[r]] = r % k;
  }

  std::vector<double> decisions(n, 0.0);
  bool out_of_fold = true;
  for (std::size_t f = 0; f < k && out_of_fold; ++f) {
    std::vector<SparseVector> train;
    std::vector<bool> train_labels;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold[i] == f) continue;
      train.push_back(vectors[i]);
      train_labels.push_back(is_positive[i]);
    }
    const auto pos = std::count(train_labels.begin(), train_labels.end(), true);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(train_labels.size())) {
      out_of_fold = false;
      break;
    }
    const MarginModel partial = fit_margin_weights(train, train_labels, dimension, config);
    for (std::size_t i = 0; i < n; ++i) {
      if (fold[i] == f) decisions[i] = partial.decision(vectors[i]);
    }
  }
  if (!out_of_fold) {
    // Too few examples per class for held-out folds; fall back to in-sample values.
    for (std::size_t i = 0; i < n; ++i) decisions[i] = model.decision(vectors[i]);
  }
  std::tie(model.calibration_a, model.calibration_b) = fit_platt(decisions, is_positive);
  return model;
}

}  // namespace qaexpert::vectorize
