#include "qaexpert/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qaexpert/error.hpp"

namespace qaexpert::profiles {

std::string_view to_string(UserType type) {
  switch (type) {
    case UserType::Expert: return "expert";
    case UserType::NonExpert: return "nonexpert";
    case UserType::OutOfScope: return "out_of_scope";
    case UserType::Unclassified: return "unclassified";
  }
  return "unknown";
}

std::vector<UserProfile> classify_users(const std::unordered_map<std::string, Label>& predictions,
                                        const corpus::CorpusStore& store, const ProfileOptions& options) {
  std::map<std::string, std::array<std::size_t, kNumClasses>> counts;
  for (const auto& [id, label] : predictions) {
    const auto* c = store.find_comment(id);
    if (c == nullptr || corpus::is_deleted_author(c->author)) continue;
    ++counts[c->author][index(label)];
  }
  std::vector<UserProfile> out;
  for (const auto& [user, per_class] : counts) {
    UserProfile p;
    p.username = user;
    p.n_comments = store.comments_by(user).size();
    p.n_posts = store.posts_by(user).size();
    const bool active = options.rule == ActivityRule::Total
                            ? p.n_comments + p.n_posts >= options.min_activity
                            : p.n_comments >= options.min_activity && p.n_posts >= options.min_activity;
    if (!active) continue;
    p.n_labelled_items = per_class[0] + per_class[1] + per_class[2];
    const auto n = static_cast<double>(p.n_labelled_items);
    p.share_expert = static_cast<double>(per_class[0]) / n;
    p.share_nonexpert = static_cast<double>(per_class[1]) / n;
    p.share_oos = static_cast<double>(per_class[2]) / n;
    const std::array<double, kNumClasses> shares = {p.share_expert, p.share_nonexpert, p.share_oos};
    int qualifying = -1;
    std::size_t hits = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (shares[c] >= options.type_threshold - 1e-12) {
        qualifying = static_cast<int>(c);
        ++hits;
      }
    }
    p.user_type = hits == 1 ? static_cast<UserType>(qualifying) : UserType::Unclassified;
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Rows of the matrix grouped by predicted class, in id order.
std::array<std::vector<const std::vector<double>*>, kNumClasses> group_rows(
    const std::unordered_map<std::string, Label>& predictions, const features::FeatureMatrix& matrix) {
  std::unordered_map<std::string, std::size_t> row_index;
  for (std::size_t i = 0; i < matrix.ids.size(); ++i) row_index.emplace(matrix.ids[i], i);
  std::vector<std::string> ids;
  for (const auto& [id, label] : predictions) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  std::array<std::vector<const std::vector<double>*>, kNumClasses> groups;
  for (const auto& id : ids) {
    auto it = row_index.find(id);
    require(it != row_index.end(), ErrorCode::kPrecondition, "predicted comment '" + id + "' has no feature row");
    groups[index(predictions.at(id))].push_back(&matrix.rows[it->second]);
  }
  return groups;
}

stats::ManovaResult manova_of(const std::array<std::vector<const std::vector<double>*>, kNumClasses>& groups) {
  std::vector<std::vector<std::vector<double>>> data;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    std::vector<std::vector<double>> rows;
    for (const auto* r : g) rows.push_back(*r);
    data.push_back(std::move(rows));
  }
  require(data.size() >= 2, ErrorCode::kPrecondition, "MANOVA needs predictions from at least two classes");
  return stats::manova_wilks(data);
}

}  // namespace

stats::ManovaResult manova_by_class(const std::unordered_map<std::string, Label>& predictions,
                                    const features::FeatureMatrix& matrix) {
  return manova_of(group_rows(predictions, matrix));
}

Characteristics class_characteristics(const std::unordered_map<std::string, Label>& predictions,
                                      const features::FeatureMatrix& matrix, bool run_manova) {
  Characteristics out;
  out.feature_names = matrix.feature_names;
  const auto groups = group_rows(predictions, matrix);
  const std::size_t p = matrix.feature_names.size();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out.class_sizes[c] = groups[c].size();
    if (groups[c].size() < 2) {
      out.notes.push_back("class '" + std::string(qaexpert::to_string(label_from_code(static_cast<int>(c)))) +
                          "' has fewer than two members; its statistics are undefined");
    }
    out.per_class[c].resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      FeatureSummary& s = out.per_class[c][j];
      s.n = groups[c].size();
      if (s.n == 0) continue;
      std::vector<double> v;
      v.reserve(s.n);
      for (const auto* r : groups[c]) v.push_back((*r)[j]);
      std::sort(v.begin(), v.end());
      double sum = 0.0;
      for (double x : v) sum += x;
      s.mean = sum / static_cast<double>(s.n);
      s.median = quantile_sorted(v, 0.5);
      s.q1 = quantile_sorted(v, 0.25);
      s.q3 = quantile_sorted(v, 0.75);
      s.defined = s.n >= 2;
    }
  }

  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (groups[c].size() >= 2) eligible.push_back(c);
  }
  out.anova.assign(p, std::nullopt);
  if (eligible.size() >= 2) {
    for (std::size_t j = 0; j < p; ++j) {
      std::vector<std::vector<double>> values;
      for (std::size_t c : eligible) {
        std::vector<double> g;
        for (const auto* r : groups[c]) g.push_back((*r)[j]);
        values.push_back(std::move(g));
      }
      out.anova[j] = stats::anova_oneway(values);
    }
  } else {
    out.notes.push_back("fewer than two classes with two or more members; ANOVA is undefined");
  }

  if (run_manova) {
    try {
      out.manova = manova_of(groups);
    } catch (const Error& e) {
      out.manova_error = StructuredError{e.code(), e.what()};
    }
  }
  return out;
}

RadarTable profile_summary(const std::vector<UserProfile>& profiles, const features::FeatureMatrix& matrix,
                           const corpus::CorpusStore& store, const std::vector<std::string>& features) {
  RadarTable out;
  std::vector<std::size_t> columns;
  if (features.empty()) {
    for (std::size_t j = 0; j < matrix.feature_names.size(); ++j) columns.push_back(j);
  } else {
    for (const auto& name : features) columns.push_back(matrix.column(name));
  }
  for (std::size_t j : columns) out.feature_names.push_back(matrix.feature_names[j]);

  std::unordered_map<std::string, std::size_t> row_index;
  for (std::size_t i = 0; i < matrix.ids.size(); ++i) row_index.emplace(matrix.ids[i], i);

  std::array<std::vector<double>, kNumClasses> sums;
  std::array<std::size_t, kNumClasses> users{};
  for (auto& s : sums) s.assign(columns.size(), 0.0);
  for (const auto& profile : profiles) {
    if (profile.user_type == UserType::Unclassified) continue;
    std::vector<double> user_sum(columns.size(), 0.0);
    std::size_t rows = 0;
    for (std::size_t ci : store.comments_by(profile.username)) {
      auto it = row_index.find(store.comments()[ci].id);
      if (it == row_index.end()) continue;
      for (std::size_t k = 0; k < columns.size(); ++k) user_sum[k] += matrix.rows[it->second][columns[k]];
      ++rows;
    }
    if (rows == 0) continue;
    const auto t = static_cast<std::size_t>(profile.user_type);
    for (std::size_t k = 0; k < columns.size(); ++k) sums[t][k] += user_sum[k] / static_cast<double>(rows);
    ++users[t];
  }
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    const auto type = static_cast<UserType>(t);
    if (users[t] == 0) {
      out.notes.push_back("no users of type '" + std::string(to_string(type)) + "'; omitted");
      continue;
    }
    out.types.push_back(type);
    out.user_counts.push_back(users[t]);
    std::vector<double> means(columns.size());
    for (std::size_t k = 0; k < columns.size(); ++k) means[k] = sums[t][k] / static_cast<double>(users[t]);
    out.raw.push_back(std::move(means));
  }
  out.normalized = out.raw;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t r = 0; r < out.raw.size(); ++r) {
      lo = r == 0 ? out.raw[r][k] : std::min(lo, out.raw[r][k]);
      hi = r == 0 ? out.raw[r][k] : std::max(hi, out.raw[r][k]);
    }
    for (std::size_t r = 0; r < out.raw.size(); ++r) {
      out.normalized[r][k] = hi > lo ? (out.raw[r][k] - lo) / (hi - lo) : 0.0;
    }
  }
  return out;
}

io::Table profiles_table(const std::vector<UserProfile>& profiles) {
  io::Table t;
  t.header = {"username", "n_labelled_items", "n_comments", "n_posts", "share_expert", "share_nonexpert",
              "share_oos", "user_type"};
  for (const auto& p : profiles) {
    t.rows.push_back({p.username, std::to_string(p.n_labelled_items), std::to_string(p.n_comments),
                      std::to_string(p.n_posts), io::format_double(p.share_expert),
                      io::format_double(p.share_nonexpert), io::format_double(p.share_oos),
                      std::string(to_string(p.user_type))});
  }
  return t;
}

io::Table characteristics_table(const Characteristics& c) {
  io::Table t;
  t.header = {"feature", "class", "n", "mean", "median", "q1", "q3", "defined"};
  for (std::size_t j = 0; j < c.feature_names.size(); ++j) {
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const auto& s = c.per_class[k][j];
      t.rows.push_back({c.feature_names[j], std::string(qaexpert::to_string(label_from_code(static_cast<int>(k)))),
                        std::to_string(s.n), io::format_double(s.mean), io::format_double(s.median),
                        io::format_double(s.q1), io::format_double(s.q3), s.defined ? "1" : "0"});
    }
  }
  return t;
}

io::Table anova_table(const Characteristics& c) {
  io::Table t;
  t.header = {"feature", "f_value", "p_value", "df_between", "df_within"};
  for (std::size_t j = 0; j < c.feature_names.size(); ++j) {
    if (!c.anova[j]) {
      t.rows.push_back({c.feature_names[j], "nan", "nan", "0", "0"});
      continue;
    }
    const auto& a = *c.anova[j];
    t.rows.push_back({c.feature_names[j], io::format_double(a.f_value), io::format_double(a.p_value),
                      std::to_string(a.df_between), std::to_string(a.df_within)});
  }
  return t;
}

io::Table radar_table(const RadarTable& r) {
  io::Table t;
  t.header = {"user_type", "users"};
  for (const auto& f : r.feature_names) t.header.push_back(f);
  for (std::size_t i = 0; i < r.types.size(); ++i) {
    std::vector<std::string> row{std::string(to_string(r.types[i])), std::to_string(r.user_counts[i])};
    for (double v : r.normalized[i]) row.push_back(io::format_double(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace qaexpert::profiles
