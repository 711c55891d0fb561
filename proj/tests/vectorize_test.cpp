#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "qaexpert/error.hpp"
#include "qaexpert/vectorize.hpp"

namespace vz = qaexpert::vectorize;

namespace {

using Docs = std::vector<std::vector<std::string>>;

// Dense tf-idf straight from the definitions, for comparison.
std::map<std::string, double> dense_tfidf(const Docs& corpus, const std::vector<std::string>& doc, bool smoothed) {
  const double n = static_cast<double>(corpus.size());
  std::map<std::string, double> tf;
  for (const auto& t : doc) tf[t] += 1.0;
  std::map<std::string, double> out;
  double norm2 = 0.0;
  for (const auto& [term, count] : tf) {
    double df = 0.0;
    for (const auto& d : corpus) df += std::find(d.begin(), d.end(), term) != d.end() ? 1.0 : 0.0;
    if (df == 0.0) continue;
    const double idf = smoothed ? std::log((1.0 + n) / (1.0 + df)) + 1.0 : std::log(n / df);
    const double w = count * idf;
    if (w == 0.0) continue;
    out[term] = w;
    norm2 += w * w;
  }
  for (auto& [term, w] : out) w /= std::sqrt(norm2);
  return out;
}

Docs random_docs(std::mt19937_64& rng, std::size_t n_docs) {
  const std::vector<std::string> vocab = {"data", "model", "python", "learn", "stat", "code", "job", "plot", "sql"};
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(1, 12);
  Docs docs(n_docs);
  for (auto& d : docs) {
    const std::size_t k = len(rng);
    for (std::size_t i = 0; i < k; ++i) d.push_back(vocab[pick(rng)]);
  }
  return docs;
}

}  // namespace

TEST(Tfidf, ClassicIdfOfUbiquitousTermIsZero) {
  const Docs docs = {{"a", "b"}, {"a", "c"}};
  const auto model = vz::TfidfModel::fit(docs, vz::IdfMode::Classic);
  EXPECT_EQ(model.idf("a"), 0.0);
  const std::vector<std::string> doc = {"a", "b"};
  const auto v = model.transform(doc);
  ASSERT_EQ(v.entries.size(), 1u);
  EXPECT_EQ(v.entries[0].first, *model.index_of("b"));
  EXPECT_DOUBLE_EQ(v.entries[0].second, 1.0);
}

TEST(Tfidf, SmoothedIdf) {
  const Docs docs = {{"a", "b"}, {"a", "c"}};
  const auto model = vz::TfidfModel::fit(docs, vz::IdfMode::Smoothed);
  EXPECT_DOUBLE_EQ(model.idf("b"), std::log(3.0 / 2.0) + 1.0);
  EXPECT_DOUBLE_EQ(model.idf("a"), 1.0);
  EXPECT_EQ(model.document_frequency("a"), 2u);
}

TEST(Tfidf, VocabularyIsLexicographic) {
  const Docs docs = {{"zeta", "alpha"}, {"mid"}};
  const auto model = vz::TfidfModel::fit(docs);
  EXPECT_EQ(model.terms(), (std::vector<std::string>{"alpha", "mid", "zeta"}));
  EXPECT_EQ(model.index_of("mid"), 1u);
  EXPECT_FALSE(model.index_of("none").has_value());
}

TEST(Tfidf, EmptyCorpusRejected) { EXPECT_THROW(vz::TfidfModel::fit({}), qaexpert::Error); }

TEST(Tfidf, UnseenTermsGiveZeroVector) {
  const auto model = vz::TfidfModel::fit({{"a"}, {"b"}});
  const std::vector<std::string> doc = {"q", "r"};
  EXPECT_TRUE(model.transform(doc).is_zero());
}

TEST(Tfidf, MatchesDenseOracleOnRandomCorpora) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto docs = random_docs(rng, 3 + trial % 10);
    for (bool smoothed : {false, true}) {
      const auto model = vz::TfidfModel::fit(docs, smoothed ? vz::IdfMode::Smoothed : vz::IdfMode::Classic);
      for (const auto& d : docs) {
        const auto v = model.transform(d);
        const auto expected = dense_tfidf(docs, d, smoothed);
        ASSERT_EQ(v.entries.size(), expected.size());
        for (const auto& [idx, w] : v.entries) {
          const auto& term = model.terms()[idx];
          ASSERT_TRUE(expected.count(term));
          EXPECT_NEAR(w, expected.at(term), 1e-12);
        }
        if (!v.is_zero()) { EXPECT_NEAR(v.norm(), 1.0, 1e-12); }
        for (std::size_t i = 1; i < v.entries.size(); ++i) EXPECT_LT(v.entries[i - 1].first, v.entries[i].first);
      }
    }
  }
}

TEST(Tfidf, JsonRoundTrip) {
  std::mt19937_64 rng(22);
  const auto docs = random_docs(rng, 20);
  const auto model = vz::TfidfModel::fit(docs);
  const auto back = vz::TfidfModel::from_json(model.to_json());
  EXPECT_EQ(back.terms(), model.terms());
  for (const auto& d : docs) {
    const auto a = model.transform(d), b = back.transform(d);
    EXPECT_EQ(a.entries, b.entries);
  }
}

TEST(Platt, SlopePositiveAndMonotone) {
  std::vector<double> f;
  std::vector<bool> y;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < 400; ++i) {
    const bool pos = i % 2 == 0;
    f.push_back((pos ? 1.0 : -1.0) + noise(rng));
    y.push_back(pos);
  }
  const auto [a, b] = vz::fit_platt(f, y);
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(b, 0.0, 0.3);
  // Gradient of the regularised log-likelihood vanishes at the optimum.
  const double n_pos = 200, n_neg = 200;
  const double hi = (n_pos + 1) / (n_pos + 2), lo = 1.0 / (n_neg + 2);
  double ga = 0.0, gb = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double p = vz::sigmoid(a * f[i] + b);
    const double t = y[i] ? hi : lo;
    ga += (p - t) * f[i];
    gb += p - t;
  }
  EXPECT_NEAR(ga, 0.0, 1e-6);
  EXPECT_NEAR(gb, 0.0, 1e-6);
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(vz::sigmoid(0.0), 0.5);
  EXPECT_NEAR(vz::sigmoid(800.0), 1.0, 1e-15);
  EXPECT_NEAR(vz::sigmoid(-800.0), 0.0, 1e-15);
  EXPECT_FALSE(std::isnan(vz::sigmoid(-1e308)));
}

TEST(Margin, SeparatesLinearlySeparableData) {
  Docs docs;
  std::vector<bool> y;
  for (int i = 0; i < 60; ++i) {
    if (i % 2 == 0) {
      docs.push_back({"regression", "python", "model", "data"});
      y.push_back(true);
    } else {
      docs.push_back({"thanks", "lol", "nice"});
      y.push_back(false);
    }
  }
  const auto tfidf = vz::TfidfModel::fit(docs);
  std::vector<vz::SparseVector> xs;
  for (const auto& d : docs) xs.push_back(tfidf.transform(d));
  const auto model = vz::train_margin_classifier(xs, y, tfidf.vocabulary_size());
  EXPECT_GT(model.calibration_a, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double p = vz::expert_probability(model, xs[i]);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    if (y[i]) {
      EXPECT_GT(p, 0.5);
    } else {
      EXPECT_LT(p, 0.5);
    }
  }
  const auto back = vz::MarginModel::from_json(model.to_json());
  EXPECT_EQ(back.weights, model.weights);
  EXPECT_EQ(back.decision(xs[0]), model.decision(xs[0]));
}

TEST(Margin, SingleClassRejected) {
  std::vector<vz::SparseVector> xs(3);
  EXPECT_THROW(vz::train_margin_classifier(xs, {true, true, true}, 1), qaexpert::Error);
}

TEST(Margin, DeterministicForSeed) {
  std::mt19937_64 rng(9);
  const auto docs = random_docs(rng, 80);
  std::vector<bool> y;
  for (const auto& d : docs) y.push_back(std::find(d.begin(), d.end(), "python") != d.end());
  const auto tfidf = vz::TfidfModel::fit(docs);
  std::vector<vz::SparseVector> xs;
  for (const auto& d : docs) xs.push_back(tfidf.transform(d));
  const auto a = vz::train_margin_classifier(xs, y, tfidf.vocabulary_size());
  const auto b = vz::train_margin_classifier(xs, y, tfidf.vocabulary_size());
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.calibration_b, b.calibration_b);
}
