#include "qaexpert/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "qaexpert/error.hpp"

namespace qaexpert::stats {

AgreementReport cohens_kappa(std::span<const Label> a, std::span<const Label> b) {
  require(a.size() == b.size(), ErrorCode::kInvalidArgument, "kappa inputs differ in length");
  require(!a.empty(), ErrorCode::kInvalidArgument, "kappa needs at least one item");
  AgreementReport report;
  report.n_items = a.size();
  std::array<double, kNumClasses> marginal_a{}, marginal_b{};
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++report.contingency[index(a[i])][index(b[i])];
    marginal_a[index(a[i])] += 1.0;
    marginal_b[index(b[i])] += 1.0;
    if (a[i] == b[i]) ++same;
  }
  const auto n = static_cast<double>(a.size());
  report.observed_agreement = static_cast<double>(same) / n;
  double pe = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) pe += (marginal_a[c] / n) * (marginal_b[c] / n);
  report.expected_agreement = pe;
  report.kappa = pe >= 1.0 ? 1.0 : (report.observed_agreement - pe) / (1.0 - pe);
  return report;
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, ErrorCode::kInvalidArgument, "incomplete beta needs a, b > 0");
  require(x >= 0.0 && x <= 1.0, ErrorCode::kInvalidArgument, "incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_upper_tail(double f, double d1, double d2) {
  require(d1 > 0.0 && d2 > 0.0, ErrorCode::kInvalidArgument, "F distribution needs positive dfs");
  if (std::isnan(f)) return std::numeric_limits<double>::quiet_NaN();
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  require(groups.size() >= 2, ErrorCode::kInvalidArgument, "ANOVA needs at least two groups");
  std::size_t n = 0;
  double total = 0.0;
  for (const auto& g : groups) {
    require(!g.empty(), ErrorCode::kInvalidArgument, "ANOVA group is empty");
    n += g.size();
    for (double v : g) total += v;
  }
  require(n > groups.size(), ErrorCode::kInvalidArgument, "ANOVA needs more values than groups");
  const double grand = total / static_cast<double>(n);

  AnovaResult result;
  double largest_mean = std::abs(grand);
  for (const auto& g : groups) {
    double sum = 0.0;
    for (double v : g) sum += v;
    const double mean = sum / static_cast<double>(g.size());
    largest_mean = std::max(largest_mean, std::abs(mean));
    result.ss_between += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) result.ss_within += (v - mean) * (v - mean);
  }
  result.df_between = groups.size() - 1;
  result.df_within = n - groups.size();
  // Group means that differ only by rounding count as equal.
  const double resolution = 1e-13 * largest_mean;
  if (result.ss_between <= static_cast<double>(n) * resolution * resolution) result.ss_between = 0.0;
  if (result.ss_between == 0.0) {
    result.f_value = 0.0;
    result.p_value = 1.0;
  } else if (result.ss_within == 0.0) {
    result.f_value = std::numeric_limits<double>::infinity();
    result.p_value = 0.0;
  } else {
    const double ms_between = result.ss_between / static_cast<double>(result.df_between);
    const double ms_within = result.ss_within / static_cast<double>(result.df_within);
    result.f_value = ms_between / ms_within;
    result.p_value = f_upper_tail(result.f_value, static_cast<double>(result.df_between),
                                  static_cast<double>(result.df_within));
  }
  return result;
}

ManovaResult manova_wilks(const std::vector<std::vector<std::vector<double>>>& groups) {
  require(groups.size() >= 2, ErrorCode::kInvalidArgument, "MANOVA needs at least two groups");
  std::size_t width = 0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    require(!g.empty(), ErrorCode::kInvalidArgument, "MANOVA group is empty");
    for (const auto& row : g) {
      if (n == 0) width = row.size();
      require(row.size() == width, ErrorCode::kInvalidArgument, "MANOVA rows differ in width");
      ++n;
    }
  }
  require(width > 0, ErrorCode::kInvalidArgument, "MANOVA needs at least one feature");

  const auto p_all = static_cast<Eigen::Index>(width);
  Eigen::VectorXd grand = Eigen::VectorXd::Zero(p_all);
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(p_all, p_all);
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(p_all, p_all);
  std::vector<Eigen::VectorXd> means;
  for (const auto& g : groups) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p_all);
    for (const auto& row : g) mean += Eigen::Map<const Eigen::VectorXd>(row.data(), p_all);
    grand += mean;
    mean /= static_cast<double>(g.size());
    means.push_back(mean);
  }
  grand /= static_cast<double>(n);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (const auto& row : groups[gi]) {
      const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(row.data(), p_all);
      const Eigen::VectorXd dw = x - means[gi];
      const Eigen::VectorXd dt = x - grand;
      within.noalias() += dw * dw.transpose();
      total.noalias() += dt * dt.transpose();
    }
  }

  // Greedy column selection: keep a column when its within-group variation
  // is not explained by the columns already kept.
  ManovaResult result;
  for (Eigen::Index j = 0; j < p_all; ++j) {
    const double wjj = within(j, j);
    bool keep = wjj > 1e-12 * std::max(1.0, total(j, j));
    if (keep && !result.used_columns.empty()) {
      const auto k = static_cast<Eigen::Index>(result.used_columns.size());
      Eigen::MatrixXd sub(k, k);
      Eigen::VectorXd cross(k);
      for (Eigen::Index r = 0; r < k; ++r) {
        const auto cr = static_cast<Eigen::Index>(result.used_columns[r]);
        cross(r) = within(cr, j);
        for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = within(cr, static_cast<Eigen::Index>(result.used_columns[c]));
      }
      const double residual = wjj - cross.dot(sub.ldlt().solve(cross));
      keep = residual > 1e-10 * wjj;
    }
    if (keep) {
      result.used_columns.push_back(static_cast<std::size_t>(j));
    } else {
      result.dropped_columns.push_back(static_cast<std::size_t>(j));
      result.warnings.push_back("dropped collinear or constant column " + std::to_string(j));
    }
  }
  require(!result.used_columns.empty(), ErrorCode::kPrecondition,
          "MANOVA: within-group scatter is zero for every column");

  const auto p = static_cast<Eigen::Index>(result.used_columns.size());
  const std::size_t g = groups.size();
  require(n > result.used_columns.size() + g, ErrorCode::kPrecondition,
          "MANOVA needs more observations than features plus groups");
  Eigen::MatrixXd w(p, p), t(p, p);
  for (Eigen::Index r = 0; r < p; ++r) {
    for (Eigen::Index c = 0; c < p; ++c) {
      const auto rr = static_cast<Eigen::Index>(result.used_columns[r]);
      const auto cc = static_cast<Eigen::Index>(result.used_columns[c]);
      w(r, c) = within(rr, cc);
      t(r, c) = total(rr, cc);
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> w_chol(w);
  const Eigen::LLT<Eigen::MatrixXd> t_chol(t);
  require(w_chol.info() == Eigen::Success && t_chol.info() == Eigen::Success, ErrorCode::kPrecondition,
          "MANOVA: scatter matrix is not positive definite");
  const double logdet_w = 2.0 * w_chol.matrixLLT().diagonal().array().log().sum();
  const double logdet_t = 2.0 * t_chol.matrixLLT().diagonal().array().log().sum();
  result.wilks_lambda = std::min(1.0, std::exp(logdet_w - logdet_t));

  const double pd = static_cast<double>(p);
  const double nu_h = static_cast<double>(g - 1);
  const double nu_e = static_cast<double>(n - g);
  const double denom = pd * pd + nu_h * nu_h - 5.0;
  const double s = denom > 0.0 ? std::sqrt((pd * pd * nu_h * nu_h - 4.0) / denom) : 1.0;
  const double m = nu_e - (pd - nu_h + 1.0) / 2.0;
  result.df1 = pd * nu_h;
  result.df2 = m * s - (pd * nu_h - 2.0) / 2.0;
  const double root = std::pow(result.wilks_lambda, 1.0 / s);
  result.f_approx = root >= 1.0 ? 0.0 : (1.0 - root) / root * result.df2 / result.df1;
  result.p_value = result.df2 > 0.0 ? f_upper_tail(result.f_approx, result.df1, result.df2) : 1.0;
  return result;
}

}  // namespace qaexpert::stats
