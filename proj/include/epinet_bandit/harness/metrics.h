#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "epinet_bandit/env/interaction_log.h"

namespace epinet_bandit::harness {

inline constexpr long kUnbounded = -1;

// Half-open impression-count buckets [b_i, b_{i+1}); the last one is
// [b_last, inf).
class BucketSpec {
 public:
  explicit BucketSpec(std::vector<long> boundaries);
  static BucketSpec standard();

  std::size_t size() const { return boundaries_.size(); }
  std::size_t index_of(long impression_count) const;
  long lo(std::size_t i) const { return boundaries_.at(i); }
  long hi(std::size_t i) const { return i + 1 < boundaries_.size() ? boundaries_[i + 1] : kUnbounded; }
  const std::vector<long>& boundaries() const { return boundaries_; }

 private:
  std::vector<long> boundaries_;
};

// Aggregates for one (arm, seed, bucket); bucket_hi == kUnbounded for the
// open-ended bucket. Buckets are keyed by the item's impression count at
// serve time.
struct MetricRow {
  std::string arm;
  std::uint64_t seed = 0;
  long bucket_lo = 0;
  long bucket_hi = 0;
  long impressions = 0;
  long likes = 0;
  long completions = 0;
  double ws_sum = 0.0;
  double vvs_sum = 0.0;
  double cumulative_regret = 0.0;

  bool operator==(const MetricRow&) const = default;
};

std::string metrics_csv_header();
// Header plus one row per MetricRow, reals with 17 significant digits.
std::string format_metrics_csv(const std::vector<MetricRow>& rows);
// Throws AnalysisError on a wrong header or malformed row.
std::vector<MetricRow> parse_metrics_csv(std::string_view text);

// Streams log records for one (arm, seed) into bucket rows.
class MetricAccumulator {
 public:
  MetricAccumulator(std::string arm, std::uint64_t seed, BucketSpec buckets);

  void add(const env::LogRecord& record);
  // Non-empty buckets in ascending order.
  std::vector<MetricRow> rows() const;

 private:
  std::string arm_;
  std::uint64_t seed_;
  BucketSpec buckets_;
  std::vector<MetricRow> rows_;
};

// Per (arm, seed) totals.
struct SummaryRow {
  std::string arm;
  std::uint64_t seed = 0;
  long steps = 0;
  long impressions = 0;
  double cumulative_reward = 0.0;           // realized
  double cumulative_expected_reward = 0.0;  // expected value of the served slates
  double cumulative_regret = 0.0;
  double final_window_regret = 0.0;  // mean per-step regret over the final window

  bool operator==(const SummaryRow&) const = default;
};

std::string summary_csv_header();
std::string format_summary_csv(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> parse_summary_csv(std::string_view text);

}  // namespace epinet_bandit::harness
