#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "qaexpert/error.hpp"
#include "qaexpert/profiles.hpp"

namespace pf = qaexpert::profiles;
namespace corpus = qaexpert::corpus;
namespace ft = qaexpert::features;
using qaexpert::Label;

namespace {

constexpr Label E = Label::Expert, N = Label::NonExpert, O = Label::OutOfScope;

struct Scenario {
  corpus::CorpusStore store;
  std::unordered_map<std::string, Label> predictions;
};

// Each entry: author and the predicted classes of their comments.
Scenario scenario(const std::vector<std::pair<std::string, std::vector<Label>>>& users) {
  corpus::PostRecord p{"p1", "op", "t", "b", 100, 1, 1.0, 0, "ds"};
  std::vector<corpus::CommentRecord> comments;
  std::unordered_map<std::string, Label> predictions;
  int k = 0;
  for (const auto& [author, labels] : users) {
    for (Label l : labels) {
      const std::string id = "c" + std::to_string(k++);
      comments.push_back({id, "p1", "p1", author, "text " + id, 200 + k, 0, true});
      predictions[id] = l;
    }
  }
  return {corpus::CorpusStore::from_records({p}, comments), predictions};
}

ft::FeatureMatrix matrix_for(const Scenario& s, const std::function<double(Label)>& value) {
  ft::FeatureMatrix m;
  m.feature_names = {"word_count", "flat"};
  m.families = {ft::Family::Nlp, ft::Family::Nlp};
  for (const auto& c : s.store.comments()) {
    m.ids.push_back(c.id);
    m.rows.push_back({value(s.predictions.at(c.id)), 1.0});
  }
  return m;
}

}  // namespace

TEST(ClassifyUsers, MajorityShareTypesUser) {
  const auto s = scenario({{"ann", {E, E, E, E, N, N}}});
  const auto p = pf::classify_users(s.predictions, s.store);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0].share_expert, 4.0 / 6.0, 1e-12);
  EXPECT_NEAR(p[0].share_expert, 0.667, 1e-3);
  EXPECT_EQ(p[0].user_type, pf::UserType::Expert);
  EXPECT_EQ(p[0].n_labelled_items, 6u);
}

TEST(ClassifyUsers, LowActivityExcluded) {
  const auto s = scenario({{"ann", {E, E, E}}, {"ben", {N, N, N, N, N}}});
  const auto p = pf::classify_users(s.predictions, s.store);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].username, "ben");
}

TEST(ClassifyUsers, NoDominantClassIsUnclassified) {
  const auto s = scenario({{"cat", {E, E, N, N, O}}});
  const auto p = pf::classify_users(s.predictions, s.store);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0].share_expert, 0.4, 1e-12);
  EXPECT_EQ(p[0].user_type, pf::UserType::Unclassified);
}

TEST(ClassifyUsers, ExactHalfTieIsUnclassified) {
  const auto s = scenario({{"dan", {E, E, E, N, N, N}}});
  EXPECT_EQ(pf::classify_users(s.predictions, s.store)[0].user_type, pf::UserType::Unclassified);
}

TEST(ClassifyUsers, SharesSumToOneAndTypesAreConserved) {
  const auto s = scenario({{"a", {E, E, E, E, E}},
                           {"b", {N, N, N, O, O}},
                           {"c", {O, O, O, O, O, O}},
                           {"d", {E, N, O, E, N}},
                           {"e", {E}},
                           {"[deleted]", {E, E, E, E, E}}});
  const auto p = pf::classify_users(s.predictions, s.store);
  ASSERT_EQ(p.size(), 4u);
  std::size_t typed = 0, unclassified = 0;
  for (const auto& u : p) {
    EXPECT_NEAR(u.share_expert + u.share_nonexpert + u.share_oos, 1.0, 1e-12);
    (u.user_type == pf::UserType::Unclassified ? unclassified : typed)++;
  }
  EXPECT_EQ(typed + unclassified, p.size());
  EXPECT_EQ(typed, 3u);
  EXPECT_TRUE(std::is_sorted(p.begin(), p.end(), [](const auto& x, const auto& y) { return x.username < y.username; }));
}

TEST(ClassifyUsers, EachRuleNeedsPostsToo) {
  const auto s = scenario({{"ann", {E, E, E, E, E}}});
  pf::ProfileOptions options;
  options.rule = pf::ActivityRule::Each;
  EXPECT_TRUE(pf::classify_users(s.predictions, s.store, options).empty());
}

TEST(Characteristics, SummariesAndAnova) {
  const auto s = scenario({{"a", {E, E, E}}, {"b", {N, N, N}}, {"c", {O, O, O}}});
  const auto m = matrix_for(s, [](Label l) { return 10.0 - 4.0 * qaexpert::code(l); });
  const auto c = pf::class_characteristics(s.predictions, m, false);
  EXPECT_EQ(c.class_sizes, (std::array<std::size_t, 3>{3, 3, 3}));
  EXPECT_DOUBLE_EQ(c.per_class[0][0].mean, 10.0);
  EXPECT_DOUBLE_EQ(c.per_class[2][0].median, 2.0);
  ASSERT_TRUE(c.anova[0].has_value());
  EXPECT_TRUE(std::isinf(c.anova[0]->f_value));
  ASSERT_TRUE(c.anova[1].has_value());
  EXPECT_EQ(c.anova[1]->f_value, 0.0);
  EXPECT_FALSE(c.manova.has_value());
  EXPECT_EQ(pf::anova_table(c).rows.size(), 2u);
}

TEST(Characteristics, SingleMemberClassUndefined) {
  const auto s = scenario({{"a", {E, E, N, N, O}}});
  const auto m = matrix_for(s, [](Label l) { return static_cast<double>(qaexpert::code(l)); });
  const auto c = pf::class_characteristics(s.predictions, m, false);
  EXPECT_FALSE(c.per_class[2][0].defined);
  EXPECT_TRUE(c.per_class[0][0].defined);
}

TEST(Characteristics, MissingFeatureRowIsPrecondition) {
  const auto s = scenario({{"a", {E, N}}});
  auto m = matrix_for(s, [](Label) { return 1.0; });
  m.ids.pop_back();
  m.rows.pop_back();
  try {
    pf::class_characteristics(s.predictions, m);
    FAIL();
  } catch (const qaexpert::Error& e) {
    EXPECT_EQ(e.code(), qaexpert::ErrorCode::kPrecondition);
  }
}

TEST(Manova, NeedsTwoClasses) {
  const auto s = scenario({{"a", {E, E, E}}});
  const auto m = matrix_for(s, [](Label) { return 1.0; });
  EXPECT_THROW(pf::manova_by_class(s.predictions, m), qaexpert::Error);
}

TEST(Radar, MeanOfPerUserMeansAndMinMax) {
  // ann: expert comments 10, 10, 10, 10, 4 -> per-user mean 8.8.
  // bob: nonexpert comments valued 2 -> mean 2.
  const auto s = scenario({{"ann", {E, E, E, E, N}}, {"bob", {N, N, N, N, N}}});
  const auto m = matrix_for(s, [](Label l) { return l == E ? 10.0 : (l == N ? 4.0 : 0.0); });
  auto m2 = m;
  for (std::size_t i = 0; i < m2.ids.size(); ++i)
    if (s.store.find_comment(m2.ids[i])->author == "bob") m2.rows[i][0] = 2.0;
  const auto profiles = pf::classify_users(s.predictions, s.store);
  const auto r = pf::profile_summary(profiles, m2, s.store);
  ASSERT_EQ(r.types.size(), 2u);
  EXPECT_EQ(r.types[0], pf::UserType::Expert);
  EXPECT_DOUBLE_EQ(r.raw[0][0], 8.8);
  EXPECT_DOUBLE_EQ(r.raw[1][0], 2.0);
  EXPECT_DOUBLE_EQ(r.normalized[0][0], 1.0);
  EXPECT_DOUBLE_EQ(r.normalized[1][0], 0.0);
  EXPECT_DOUBLE_EQ(r.normalized[0][1], 0.0);  // flat column
  EXPECT_EQ(pf::radar_table(r).rows.size(), 2u);
  EXPECT_EQ(pf::profiles_table(profiles).rows.size(), 2u);
}
