#include "epinet_bandit/harness/metrics.h"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "epinet_bandit/errors.h"

namespace epinet_bandit::harness {
namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_bound(long v) { return v == kUnbounded ? "inf" : std::to_string(v); }

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw AnalysisError("line " + std::to_string(line_no) + ": bad numeric field '" + std::string(field) + "'");
  return value;
}

long parse_bound(std::string_view field, std::size_t line_no) {
  return field == "inf" ? kUnbounded : parse_number<long>(field, line_no);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Calls fn(fields, line_no) for each data line after checking the header.
template <typename Fn>
void for_each_csv_row(std::string_view text, const std::string& header, std::size_t columns, Fn fn) {
  std::size_t start = 0;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!seen_header) {
      if (line != header) throw AnalysisError("unexpected CSV header '" + std::string(line) + "'");
      seen_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != columns)
      throw AnalysisError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " fields");
    fn(fields, line_no);
  }
  if (!seen_header) throw AnalysisError("empty CSV");
}

}  // namespace

BucketSpec::BucketSpec(std::vector<long> boundaries) : boundaries_(std::move(boundaries)) {
  if (boundaries_.empty() || boundaries_.front() != 0) throw ConfigError("bucket boundaries must start at 0");
  for (std::size_t i = 1; i < boundaries_.size(); ++i)
    if (boundaries_[i] <= boundaries_[i - 1]) throw ConfigError("bucket boundaries must be strictly increasing");
}

BucketSpec BucketSpec::standard() { return BucketSpec({0, 100, 200, 400, 1000, 2000, 3000, 4000, 5000, 10000}); }

std::size_t BucketSpec::index_of(long impression_count) const {
  if (impression_count < 0) throw EnvironmentError("negative impression count");
  const auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), impression_count);
  return static_cast<std::size_t>(it - boundaries_.begin()) - 1;
}

std::string metrics_csv_header() {
  return "arm,seed,bucket_lo,bucket_hi,impressions,likes,completions,ws_sum,vvs_sum,cumulative_regret";
}

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = metrics_csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.arm + "," + std::to_string(r.seed) + "," + fmt_bound(r.bucket_lo) + "," + fmt_bound(r.bucket_hi) + "," +
           std::to_string(r.impressions) + "," + std::to_string(r.likes) + "," + std::to_string(r.completions) + "," +
           fmt_real(r.ws_sum) + "," + fmt_real(r.vvs_sum) + "," + fmt_real(r.cumulative_regret) + "\n";
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(std::string_view text) {
  std::vector<MetricRow> rows;
  for_each_csv_row(text, metrics_csv_header(), 10, [&](const auto& f, std::size_t n) {
    MetricRow r;
    r.arm = std::string(f[0]);
    r.seed = parse_number<std::uint64_t>(f[1], n);
    r.bucket_lo = parse_bound(f[2], n);
    r.bucket_hi = parse_bound(f[3], n);
    r.impressions = parse_number<long>(f[4], n);
    r.likes = parse_number<long>(f[5], n);
    r.completions = parse_number<long>(f[6], n);
    r.ws_sum = parse_number<double>(f[7], n);
    r.vvs_sum = parse_number<double>(f[8], n);
    r.cumulative_regret = parse_number<double>(f[9], n);
    rows.push_back(std::move(r));
  });
  return rows;
}

MetricAccumulator::MetricAccumulator(std::string arm, std::uint64_t seed, BucketSpec buckets)
    : arm_(std::move(arm)), seed_(seed), buckets_(std::move(buckets)) {
  rows_.resize(buckets_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    rows_[i].arm = arm_;
    rows_[i].seed = seed_;
    rows_[i].bucket_lo = buckets_.lo(i);
    rows_[i].bucket_hi = buckets_.hi(i);
  }
}

void MetricAccumulator::add(const env::LogRecord& record) {
  MetricRow& row = rows_[buckets_.index_of(record.impression_count)];
  ++row.impressions;
  if (record.labels[1] > 0.5) ++row.likes;
  if (record.completed_count >= 1) ++row.completions;
  row.ws_sum += record.labels[0];
  row.vvs_sum += record.labels[3];
  row.cumulative_regret += record.regret;
}

std::vector<MetricRow> MetricAccumulator::rows() const {
  std::vector<MetricRow> out;
  for (const auto& r : rows_)
    if (r.impressions > 0) out.push_back(r);
  return out;
}

std::string summary_csv_header() {
  return "arm,seed,steps,impressions,cumulative_reward,cumulative_expected_reward,cumulative_regret,"
         "final_window_regret";
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = summary_csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.arm + "," + std::to_string(r.seed) + "," + std::to_string(r.steps) + "," + std::to_string(r.impressions) +
           "," + fmt_real(r.cumulative_reward) + "," + fmt_real(r.cumulative_expected_reward) + "," +
           fmt_real(r.cumulative_regret) + "," + fmt_real(r.final_window_regret) + "\n";
  }
  return out;
}

std::vector<SummaryRow> parse_summary_csv(std::string_view text) {
  std::vector<SummaryRow> rows;
  for_each_csv_row(text, summary_csv_header(), 8, [&](const auto& f, std::size_t n) {
    SummaryRow r;
    r.arm = std::string(f[0]);
    r.seed = parse_number<std::uint64_t>(f[1], n);
    r.steps = parse_number<long>(f[2], n);
    r.impressions = parse_number<long>(f[3], n);
    r.cumulative_reward = parse_number<double>(f[4], n);
    r.cumulative_expected_reward = parse_number<double>(f[5], n);
    r.cumulative_regret = parse_number<double>(f[6], n);
    r.final_window_regret = parse_number<double>(f[7], n);
    rows.push_back(std::move(r));
  });
  return rows;
}

}  // namespace epinet_bandit::harness
