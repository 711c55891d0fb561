#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace qaexpert::vectorize {

enum class IdfMode {
  Classic,   // ln(N / df)
  Smoothed,  // ln((1 + N) / (1 + df)) + 1
};

struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by index, no duplicates

  double norm() const;
  bool is_zero() const { return entries.empty(); }
};

class TfidfModel {
 public:
  // Vocabulary indices follow lexicographic term order. Throws on an empty corpus.
  static TfidfModel fit(const std::vector<std::vector<std::string>>& documents,
                        IdfMode mode = IdfMode::Smoothed);

  // tf * idf, L2-normalised. Unseen terms are dropped; zero-weight entries
  // are omitted, so an all-unseen or all-ubiquitous document is the zero vector.
  SparseVector transform(std::span<const std::string> tokens) const;

  std::optional<std::uint32_t> index_of(std::string_view term) const;
  double idf(std::string_view term) const;
  std::size_t document_frequency(std::string_view term) const;
  std::size_t vocabulary_size() const { return terms_.size(); }
  std::size_t n_documents() const { return n_documents_; }
  IdfMode idf_mode() const { return mode_; }
  const std::vector<std::string>& terms() const { return terms_; }

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t n_documents_ = 0;
  IdfMode mode_ = IdfMode::Smoothed;
};

struct MarginConfig {
  double lambda = 1e-4;  // L2 penalty
  std::size_t epochs = 20;
  std::uint64_t seed = 7;
  std::size_t calibration_folds = 3;
};

// Linear max-margin classifier with a Platt calibration p = sigmoid(a * f + b).
struct MarginModel {
  std::vector<double> weights;
  double bias = 0.0;
  double calibration_a = 1.0;  // kept > 0 so probability rises with the decision value
  double calibration_b = 0.0;

  double decision(const SparseVector& x) const;

  nlohmann::json to_json() const;
  static MarginModel from_json(const nlohmann::json& j);
};

// Hinge loss + L2 penalty by seeded stochastic subgradient descent (the
// intercept is an extra constant feature), then Platt scaling fit on
// out-of-fold decision values. Throws if only one class is present.
MarginModel train_margin_classifier(std::span<const SparseVector> vectors,
                                    const std::vector<bool>& is_positive, std::size_t dimension,
                                    const MarginConfig& config = {});

// Raw max-margin fit without calibration (calibration stays at a=1, b=0).
MarginModel fit_margin_weights(std::span<const SparseVector> vectors, const std::vector<bool>& is_positive,
                               std::size_t dimension, const MarginConfig& config);

// Regularised maximum-likelihood sigmoid fit (Newton with backtracking and
// Platt's smoothed targets). Returns (a, b).
std::pair<double, double> fit_platt(std::span<const double> decisions, const std::vector<bool>& is_positive);

double sigmoid(double z);
double expert_probability(const MarginModel& model, const SparseVector& x);

}  // namespace qaexpert::vectorize
