#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qaexpert/labels.hpp"

namespace qaexpert::stats {

struct AgreementReport {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  std::size_t n_items = 0;
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> contingency{};  // [a][b]
};

// kappa = (po - pe) / (1 - pe); defined as 1 when pe = 1 (both coders
// constant and equal). Throws on length mismatch or empty input.
AgreementReport cohens_kappa(std::span<const Label> a, std::span<const Label> b);

struct AnovaResult {
  double f_value = 0.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
  double p_value = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
};

// One-way ANOVA. Needs >= 2 groups, none empty, and more values than groups.
// Zero between- and within-group variation gives F = 0, p = 1; zero
// within-group variation alone gives F = +inf, p = 0.
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

struct ManovaResult {
  double wilks_lambda = 1.0;
  double f_approx = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;
  double p_value = 1.0;
  std::vector<std::size_t> used_columns;
  std::vector<std::size_t> dropped_columns;  // collinear within groups
  std::vector<std::string> warnings;
};

// Wilks' lambda = det(W) / det(W + B) with Rao's F approximation.
// groups[g][i] is row i of group g; every row has the same width. Columns
// that are (near) linear combinations of earlier ones within groups are
// dropped with a warning before the statistic is computed.
ManovaResult manova_wilks(const std::vector<std::vector<std::vector<double>>>& groups);

// Regularised incomplete beta I_x(a, b), continued-fraction evaluation
// (modified Lentz) accurate to about 1e-14.
double regularized_incomplete_beta(double a, double b, double x);

// P(F > f) for an F(d1, d2) variable.
double f_upper_tail(double f, double d1, double d2);

}  // namespace qaexpert::stats
