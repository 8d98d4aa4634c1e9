#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mle/csv.hpp"

namespace mle::statkit {

struct ShapiroWilk {
  double w = 0.0;
  double p = 0.0;
};

// Royston's approximation (AS R94), 3 <= n <= 5000.
ShapiroWilk shapiro_wilk(std::span<const double> x);

struct PairedSample {
  std::vector<std::string> labels;
  std::vector<double> a;
  std::vector<double> b;

  // Keeps only pairs where both values are finite.
  static PairedSample mutual(std::vector<std::string> labels, std::span<const double> a, std::span<const double> b);
  std::vector<double> differences() const;  // b - a
};

enum class TestUsed { paired_t, wilcoxon };
std::string test_name(TestUsed t);

struct PairedResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_sw = 1.0;
  double p = 1.0;
  double d_z = 0.0;
  TestUsed test = TestUsed::paired_t;
};

struct PairedOptions {
  double alpha = 0.05;
  int resamples = 10000;
  std::uint64_t seed = 0;
};

// Shapiro-Wilk gate on the differences: t-test with analytic CI when
// p_sw > alpha, otherwise Wilcoxon signed-rank with a bootstrap percentile CI.
PairedResult paired_compare(const PairedSample& s, const PairedOptions& opts = {});

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

TTest paired_t(std::span<const double> d, double alpha = 0.05);

// Two-sided signed-rank p; zero differences dropped, average ranks for ties.
// Exact permutation distribution for n <= 25, otherwise normal approximation
// with tie and continuity corrections.
double wilcoxon_signed_rank(std::span<const double> d);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap of the mean (linear interpolation between order statistics).
Interval bootstrap_mean_ci(std::span<const double> d, int resamples, std::uint64_t seed, double alpha = 0.05);

// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

std::vector<double> holm_bonferroni(std::span<const double> p);

struct AncovaResult {
  double f = 0.0;
  int df_num = 0;
  int df_den = 0;
  double p = 1.0;
  double r2 = 0.0;
};

// OLS of y ~ velocity * group (categorical group, velocity covariate);
// F-test of the interaction block.
AncovaResult ancova_interaction(std::span<const double> y, std::span<const double> velocity,
                                std::span<const std::string> group);

struct ComparisonRow {
  std::string baseline;
  std::string comparison;
  PairedResult result;
  double p_adj = 1.0;
};

// Long-format table `sample_id,group,value`; comparisons pair on sample_id.
std::vector<ComparisonRow> compare_family(const CsvTable& table, const std::string& baseline,
                                          const std::vector<std::string>& comparisons, const PairedOptions& opts = {});
std::vector<std::string> groups_in_order(const CsvTable& table);
CsvTable comparison_table(const std::vector<ComparisonRow>& rows);

}  // namespace mle::statkit
