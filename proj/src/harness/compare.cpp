#include "epinet_bandit/harness/compare.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "epinet_bandit/errors.h"
#include "epinet_bandit/harness/experiment.h"

namespace epinet_bandit::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

// Linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval percentile_interval(std::vector<double> draws, double level) {
  std::sort(draws.begin(), draws.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile_sorted(draws, tail), quantile_sorted(draws, 1.0 - tail)};
}

void require_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw AnalysisError("confidence level must be in (0, 1)");
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_bound(long v) { return v == kUnbounded ? "inf" : std::to_string(v); }

struct Key {
  std::string arm;
  std::uint64_t seed;
  long bucket_lo;
  auto operator<=>(const Key&) const = default;
};

double rate_of(const MetricRow& r, const std::string& metric) {
  const auto n = static_cast<double>(r.impressions);
  if (metric == "like_rate") return static_cast<double>(r.likes) / n;
  if (metric == "completion_rate") return static_cast<double>(r.completions) / n;
  if (metric == "ws_rate") return r.ws_sum / n;
  return r.vvs_sum / n;
}

}  // namespace

CiMethod ci_method_from_string(std::string_view name) {
  if (name == "bootstrap") return CiMethod::kBootstrap;
  if (name == "t") return CiMethod::kTInterval;
  throw ConfigError("unknown interval method '" + std::string(name) + "' (bootstrap, t)");
}

double student_t_quantile(double probability, double dof) {
  return boost::math::quantile(boost::math::students_t(dof), probability);
}

Interval t_interval_mean(std::span<const double> values, double level) {
  require_level(level);
  if (values.size() < 2) throw AnalysisError("t interval needs at least two values");
  const double m = mean_of(values);
  const double n = static_cast<double>(values.size());
  const double half = student_t_quantile(0.5 + level / 2.0, n - 1.0) * std::sqrt(sample_variance(values, m) / n);
  return {m - half, m + half};
}

Interval bootstrap_mean_ci(std::span<const double> values, double level, std::size_t resamples, nn::Rng& rng) {
  require_level(level);
  if (values.size() < 2) throw AnalysisError("bootstrap needs at least two values");
  std::vector<double> draws(resamples);
  for (auto& d : draws) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[rng.uniform_index(values.size())];
    d = s / static_cast<double>(values.size());
  }
  return percentile_interval(std::move(draws), level);
}

Interval ratio_change_ci(std::span<const double> treatment, std::span<const double> control, CiMethod method,
                         double level, std::size_t resamples, nn::Rng& rng) {
  require_level(level);
  if (treatment.size() != control.size()) throw AnalysisError("paired samples differ in length");
  const std::size_t n = treatment.size();
  if (n < 2) return {kNaN, kNaN};
  if (method == CiMethod::kBootstrap) {
    std::vector<double> draws;
    draws.reserve(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
      double st = 0.0;
      double sc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = rng.uniform_index(n);
        st += treatment[j];
        sc += control[j];
      }
      if (sc != 0.0) draws.push_back(100.0 * (st / sc - 1.0));
    }
    if (draws.size() * 2 < resamples) return {kNaN, kNaN};
    return percentile_interval(std::move(draws), level);
  }
  const double mt = mean_of(treatment);
  const double mc = mean_of(control);
  if (mc == 0.0) return {kNaN, kNaN};
  const double ratio = mt / mc;
  double vt = 0.0;
  double vc = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    vt += (treatment[i] - mt) * (treatment[i] - mt);
    vc += (control[i] - mc) * (control[i] - mc);
    cov += (treatment[i] - mt) * (control[i] - mc);
  }
  const double dn = static_cast<double>(n);
  vt /= dn - 1.0;
  vc /= dn - 1.0;
  cov /= dn - 1.0;
  const double var_ratio = std::max(0.0, (vt - 2.0 * ratio * cov + ratio * ratio * vc) / (mc * mc * dn));
  const double half = 100.0 * student_t_quantile(0.5 + level / 2.0, dn - 1.0) * std::sqrt(var_ratio);
  const double centre = 100.0 * (ratio - 1.0);
  return {centre - half, centre + half};
}

PairedTTest paired_t_test_greater(std::span<const double> treatment, std::span<const double> control) {
  if (treatment.size() != control.size()) throw AnalysisError("paired samples differ in length");
  if (treatment.size() < 2) throw AnalysisError("paired t-test needs at least two pairs");
  std::vector<double> diff(treatment.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = treatment[i] - control[i];
  PairedTTest test;
  test.n = diff.size();
  test.mean_difference = mean_of(diff);
  const double se = std::sqrt(sample_variance(diff, test.mean_difference) / static_cast<double>(test.n));
  if (se == 0.0) {
    test.t_statistic = test.mean_difference > 0.0   ? std::numeric_limits<double>::infinity()
                       : test.mean_difference < 0.0 ? -std::numeric_limits<double>::infinity()
                                                    : 0.0;
    test.p_value = test.mean_difference > 0.0 ? 0.0 : test.mean_difference < 0.0 ? 1.0 : 0.5;
    return test;
  }
  test.t_statistic = test.mean_difference / se;
  test.p_value = boost::math::cdf(boost::math::complement(boost::math::students_t(static_cast<double>(test.n - 1)),
                                                          test.t_statistic));
  return test;
}

std::vector<double> impression_shares(const std::vector<MetricRow>& metrics, const std::string& arm,
                                      std::span<const std::uint64_t> seeds, long bucket_lo) {
  std::vector<double> shares;
  for (auto seed : seeds) {
    double total = 0.0;
    double in_bucket = 0.0;
    for (const auto& r : metrics) {
      if (r.arm != arm || r.seed != seed) continue;
      total += static_cast<double>(r.impressions);
      if (r.bucket_lo == bucket_lo) in_bucket += static_cast<double>(r.impressions);
    }
    shares.push_back(total > 0.0 ? in_bucket / total : 0.0);
  }
  return shares;
}

Comparison compare_arms(const std::vector<MetricRow>& metrics, const std::vector<SummaryRow>& summaries,
                        const CompareOptions& options) {
  std::map<std::uint64_t, const SummaryRow*> t_summary;
  std::map<std::uint64_t, const SummaryRow*> c_summary;
  for (const auto& s : summaries) {
    if (s.arm == kTreatmentArm) t_summary[s.seed] = &s;
    else if (s.arm == kControlArm) c_summary[s.seed] = &s;
  }
  if (t_summary.empty()) throw AnalysisError("no results for arm '" + std::string(kTreatmentArm) + "'");
  if (c_summary.empty()) throw AnalysisError("no results for arm '" + std::string(kControlArm) + "'");
  std::vector<std::uint64_t> seeds;
  for (const auto& [seed, row] : t_summary)
    if (c_summary.count(seed)) seeds.push_back(seed);
  if (seeds.size() < 2) throw AnalysisError("comparison needs at least two seeds run under both arms");

  Comparison out;
  std::vector<double> t_reward;
  std::vector<double> c_reward;
  std::vector<double> t_late;
  std::vector<double> c_late;
  for (auto seed : seeds) {
    t_reward.push_back(t_summary[seed]->cumulative_reward);
    c_reward.push_back(c_summary[seed]->cumulative_reward);
    t_late.push_back(t_summary[seed]->final_window_regret);
    c_late.push_back(c_summary[seed]->final_window_regret);
  }
  out.reward_test = paired_t_test_greater(t_reward, c_reward);
  out.late_regret_test = paired_t_test_greater(c_late, t_late);
  out.treatment_late_regret = mean_of(t_late);
  out.control_late_regret = mean_of(c_late);

  std::map<Key, const MetricRow*> index;
  std::map<long, long> bucket_hi;
  std::map<std::pair<std::string, std::uint64_t>, double> totals;
  for (const auto& r : metrics) {
    index[{r.arm, r.seed, r.bucket_lo}] = &r;
    bucket_hi[r.bucket_lo] = r.bucket_hi;
    totals[{r.arm, r.seed}] += static_cast<double>(r.impressions);
  }

  nn::Rng rng(options.rng_seed);
  for (const auto& metric : comparison_metrics()) {
    for (const auto& [lo, hi] : bucket_hi) {
      std::vector<double> t_values;
      std::vector<double> c_values;
      for (auto seed : seeds) {
        const auto t_it = index.find({kTreatmentArm, seed, lo});
        const auto c_it = index.find({kControlArm, seed, lo});
        const MetricRow* t_row = t_it == index.end() ? nullptr : t_it->second;
        const MetricRow* c_row = c_it == index.end() ? nullptr : c_it->second;
        if (metric == "impressions" || metric == "impression_share") {
          double t_count = t_row ? static_cast<double>(t_row->impressions) : 0.0;
          double c_count = c_row ? static_cast<double>(c_row->impressions) : 0.0;
          if (metric == "impression_share") {
            const double t_total = totals[{kTreatmentArm, seed}];
            const double c_total = totals[{kControlArm, seed}];
            t_count = t_total > 0.0 ? t_count / t_total : 0.0;
            c_count = c_total > 0.0 ? c_count / c_total : 0.0;
          }
          t_values.push_back(t_count);
          c_values.push_back(c_count);
        } else if (t_row && c_row) {
          t_values.push_back(rate_of(*t_row, metric));
          c_values.push_back(rate_of(*c_row, metric));
        }
      }
      ComparisonRow row;
      row.metric = metric;
      row.bucket_lo = lo;
      row.bucket_hi = hi;
      row.n_seeds = t_values.size();
      row.treatment = t_values.empty() ? kNaN : mean_of(t_values);
      row.control = c_values.empty() ? kNaN : mean_of(c_values);
      row.pct_change = row.control != 0.0 ? 100.0 * (row.treatment / row.control - 1.0) : kNaN;
      const Interval ci =
          ratio_change_ci(t_values, c_values, options.method, options.level, options.resamples, rng);
      row.ci_lo = ci.lo;
      row.ci_hi = ci.hi;
      row.significant = !std::isnan(ci.lo) && ci.excludes_zero();
      out.rows.push_back(row);
    }
  }
  return out;
}

Comparison compare_run(const std::filesystem::path& run_dir, const CompareOptions& options) {
  return compare_arms(parse_metrics_csv(read_text_file(run_dir / "metrics.csv")),
                      parse_summary_csv(read_text_file(run_dir / "summary.csv")), options);
}

std::string comparison_csv_header() {
  return "metric,bucket_lo,bucket_hi,n_seeds,treatment,control,pct_change,ci_lo,ci_hi,significant";
}

std::string format_comparison_csv(const Comparison& comparison) {
  std::string out = comparison_csv_header() + "\n";
  for (const auto& r : comparison.rows) {
    out += r.metric + "," + fmt_bound(r.bucket_lo) + "," + fmt_bound(r.bucket_hi) + "," + std::to_string(r.n_seeds) +
           "," + fmt_real(r.treatment) + "," + fmt_real(r.control) + "," + fmt_real(r.pct_change) + "," +
           fmt_real(r.ci_lo) + "," + fmt_real(r.ci_hi) + "," + (r.significant ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<ComparisonRow> parse_comparison_csv(std::string_view text) {
  const auto number = [](std::string_view f) {
    if (f == "nan" || f == "-nan") return kNaN;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size()) throw AnalysisError("bad number '" + std::string(f) + "'");
    return v;
  };
  std::vector<ComparisonRow> rows;
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    const std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    if (header) {
      if (line != comparison_csv_header()) throw AnalysisError("unexpected comparison CSV header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t s = 0;
    while (true) {
      const auto c = line.find(',', s);
      f.push_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (f.size() != 10) throw AnalysisError("comparison CSV row has wrong field count");
    ComparisonRow r;
    r.metric = std::string(f[0]);
    r.bucket_lo = static_cast<long>(number(f[1]));
    r.bucket_hi = f[2] == "inf" ? kUnbounded : static_cast<long>(number(f[2]));
    r.n_seeds = static_cast<std::size_t>(number(f[3]));
    r.treatment = number(f[4]);
    r.control = number(f[5]);
    r.pct_change = number(f[6]);
    r.ci_lo = number(f[7]);
    r.ci_hi = number(f[8]);
    r.significant = f[9] == "1";
    rows.push_back(std::move(r));
  }
  if (header) throw AnalysisError("empty comparison CSV");
  return rows;
}

std::string format_comparison_table(const Comparison& c) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "cumulative reward: mean diff %.3f over %zu seeds, t = %.3f, one-sided p = %.4g\n",
                c.reward_test.mean_difference, c.reward_test.n, c.reward_test.t_statistic, c.reward_test.p_value);
  out += buf;
  std::snprintf(buf, sizeof(buf), "final-window regret per step: treatment %.4f, control %.4f (one-sided p = %.4g)\n",
                c.treatment_late_regret, c.control_late_regret, c.late_regret_test.p_value);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-17s %-13s %5s %12s %12s %9s %21s\n", "metric", "bucket", "seeds", "treatment",
                "control", "change%", "ci");
  out += buf;
  for (const auto& r : c.rows) {
    const std::string bucket = "[" + fmt_bound(r.bucket_lo) + "," + fmt_bound(r.bucket_hi) + ")";
    std::snprintf(buf, sizeof(buf), "%-17s %-13s %5zu %12.5g %12.5g %9.2f [%8.2f, %8.2f]%s\n", r.metric.c_str(),
                  bucket.c_str(), r.n_seeds, r.treatment, r.control, r.pct_change, r.ci_lo, r.ci_hi,
                  r.significant ? " *" : "");
    out += buf;
  }
  return out;
}

}  // namespace epinet_bandit::harness
