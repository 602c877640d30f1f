#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "epinet_bandit/harness/metrics.h"
#include "epinet_bandit/nn/rng.h"

namespace epinet_bandit::harness {

enum class CiMethod { kBootstrap, kTInterval };
CiMethod ci_method_from_string(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool excludes_zero() const { return lo > 0.0 || hi < 0.0; }
};

// Two-sided Student-t quantile.
double student_t_quantile(double probability, double dof);

// Interval for the mean of `values`.
Interval t_interval_mean(std::span<const double> values, double level);
Interval bootstrap_mean_ci(std::span<const double> values, double level, std::size_t resamples, nn::Rng& rng);

// Interval for 100 * (mean(t) / mean(c) - 1) over paired seeds. The
// bootstrap resamples seed indices; the t form uses the delta method.
Interval ratio_change_ci(std::span<const double> treatment, std::span<const double> control, CiMethod method,
                         double level, std::size_t resamples, nn::Rng& rng);

struct PairedTTest {
  std::size_t n = 0;
  double mean_difference = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;  // one-sided, alternative: treatment > control
};
PairedTTest paired_t_test_greater(std::span<const double> treatment, std::span<const double> control);

struct CompareOptions {
  CiMethod method = CiMethod::kBootstrap;
  std::size_t resamples = 10000;
  double level = 0.95;
  std::uint64_t rng_seed = 20240517;
};

// One (metric, bucket) comparison. Rates are ratio-of-sums per (arm, seed,
// bucket), then averaged over the seeds where both arms have impressions in
// the bucket. `impressions` and `impression_share` count a missing bucket as
// zero. A metric without two usable seeds has n_seeds < 2 and NaN interval.
struct ComparisonRow {
  std::string metric;
  long bucket_lo = 0;
  long bucket_hi = 0;
  std::size_t n_seeds = 0;
  double treatment = 0.0;
  double control = 0.0;
  double pct_change = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool significant = false;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  PairedTTest reward_test;        // cumulative realized reward per seed
  PairedTTest late_regret_test;   // control minus treatment final-window regret
  double treatment_late_regret = 0.0;
  double control_late_regret = 0.0;
};

inline const std::vector<std::string>& comparison_metrics() {
  static const std::vector<std::string> names = {"like_rate", "completion_rate", "ws_rate", "vvs_rate", "impressions",
                                                 "impression_share"};
  return names;
}

// Throws AnalysisError when an arm is missing or fewer than two seeds are
// present for both arms.
Comparison compare_arms(const std::vector<MetricRow>& metrics, const std::vector<SummaryRow>& summaries,
                        const CompareOptions& options = {});
// Reads metrics.csv and summary.csv from a run directory.
Comparison compare_run(const std::filesystem::path& run_dir, const CompareOptions& options = {});

std::string comparison_csv_header();
std::string format_comparison_csv(const Comparison& comparison);
std::vector<ComparisonRow> parse_comparison_csv(std::string_view text);
// Human-readable table.
std::string format_comparison_table(const Comparison& comparison);

// Per-seed share of impressions served in the bucket starting at bucket_lo.
std::vector<double> impression_shares(const std::vector<MetricRow>& metrics, const std::string& arm,
                                      std::span<const std::uint64_t> seeds, long bucket_lo);

}  // namespace epinet_bandit::harness
