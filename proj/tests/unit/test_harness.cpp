#include <cmath>
#include <filesystem>
#include <map>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "epinet_bandit/env/interaction_log.h"
#include "epinet_bandit/errors.h"
#include "epinet_bandit/harness/calibrate.h"
#include "epinet_bandit/harness/charts.h"
#include "epinet_bandit/harness/compare.h"
#include "epinet_bandit/harness/config.h"
#include "epinet_bandit/harness/experiment.h"
#include "epinet_bandit/harness/gradcheck.h"
#include "epinet_bandit/harness/metrics.h"

namespace hs = epinet_bandit::harness;
namespace env = epinet_bandit::env;
namespace nn = epinet_bandit::nn;
namespace fs = std::filesystem;
using epinet_bandit::AnalysisError;
using epinet_bandit::ConfigError;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("epinet_bandit_test_" + name);
  fs::remove_all(dir);
  return dir;
}

hs::ExperimentConfig tiny_config(const fs::path& out) {
  hs::ExperimentConfig c = hs::default_config();
  hs::apply_config_text(c, R"(
env.num_items = 30
env.slate_size = 3
env.impression_cap = 40
env.user_feature_dim = 6
env.item_feature_dim = 5
env.latent_dim = 3
model.embedding_dim = 4
model.tower_hidden = 8
model.base_hidden = 8, 4
model.epinet_hidden = 8
run.horizon = 60
run.seeds = 1, 2, 3
run.bucket_boundaries = 0, 5, 10, 20
)");
  c.run.output_dir = out.string();
  return c;
}

hs::MetricRow row(const std::string& arm, std::uint64_t seed, long lo, long hi, long impressions, long likes) {
  hs::MetricRow r;
  r.arm = arm;
  r.seed = seed;
  r.bucket_lo = lo;
  r.bucket_hi = hi;
  r.impressions = impressions;
  r.likes = likes;
  r.completions = impressions / 2;
  r.ws_sum = 0.25 * static_cast<double>(impressions);
  r.vvs_sum = 0.125 * static_cast<double>(impressions);
  r.cumulative_regret = 1.5;
  return r;
}

hs::SummaryRow summary(const std::string& arm, std::uint64_t seed, double reward, double late) {
  hs::SummaryRow s;
  s.arm = arm;
  s.seed = seed;
  s.steps = 10;
  s.impressions = 100;
  s.cumulative_reward = reward;
  s.cumulative_expected_reward = reward;
  s.final_window_regret = late;
  return s;
}

const hs::ComparisonRow& find_row(const hs::Comparison& c, const std::string& metric, long lo) {
  for (const auto& r : c.rows)
    if (r.metric == metric && r.bucket_lo == lo) return r;
  throw std::runtime_error("row not found");
}

}  // namespace

// --- configuration -----------------------------------------------------------

TEST(Config, DefaultsValidateAndAreSynced) {
  const auto c = hs::default_config();
  EXPECT_NO_THROW(hs::validate(c));
  EXPECT_EQ(c.run.seeds.size(), 20u);
  EXPECT_EQ(c.run.horizon, 5000);
  EXPECT_EQ(c.env.num_items, 500u);
  EXPECT_EQ(c.agent.slate_size, c.env.slate_size);
  EXPECT_EQ(c.agent.head.input_dim, 16u * 9u);
}

TEST(Config, PaperPresetUsesThePaperArchitecture) {
  auto c = hs::default_config();
  hs::apply_paper_preset(c);
  EXPECT_EQ(c.agent.towers.embedding_dim, 128u);
  EXPECT_EQ(c.agent.head.input_dim, 1152u);
  EXPECT_EQ(c.agent.head.base_hidden, (std::vector<std::size_t>{384, 256}));
  EXPECT_EQ(c.agent.head.index_dim, 5u);
}

TEST(Config, ParsesKeyValueText) {
  auto c = hs::default_config();
  hs::apply_config_text(c, "# comment\n\nenv.num_items = 77   # trailing\n  run.seeds = 4, 5\nmodel.epinet_task = like\n");
  EXPECT_EQ(c.env.num_items, 77u);
  EXPECT_EQ(c.run.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(hs::get_key(c, "model.epinet_task"), "like");
}

TEST(Config, UnknownKeysAndBadValuesAreAllReported) {
  auto c = hs::default_config();
  try {
    hs::apply_config_text(c, "env.bogus = 1\nenv.num_items = many\nno equals sign\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("env.bogus"), std::string::npos);
    EXPECT_NE(what.find("env.num_items"), std::string::npos);
    EXPECT_NE(what.find("line 3"), std::string::npos);
  }
  EXPECT_THROW(hs::set_key(c, "agent.nope", "1"), ConfigError);
  EXPECT_THROW(hs::get_key(c, "agent.nope"), ConfigError);
}

TEST(Config, ValidationListsEveryViolation) {
  auto c = hs::default_config();
  c.run.seeds = {1, 1};
  c.run.horizon = -5;
  c.agent.epsilon = 2.0;
  try {
    hs::validate(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("duplicate"), std::string::npos);
    EXPECT_NE(what.find("run.horizon"), std::string::npos);
    EXPECT_NE(what.find("epsilon"), std::string::npos);
  }
}

TEST(Config, CanonicalTextRoundTripsAndFingerprintTracksValues) {
  auto c = hs::default_config();
  hs::set_key(c, "env.feature_noise", "0.123456789");
  hs::set_key(c, "model.control_weights", "0.5, 0.25, 0.125, 0.125");
  auto back = hs::default_config();
  hs::apply_config_text(back, hs::canonical_text(c));
  EXPECT_EQ(hs::canonical_text(back), hs::canonical_text(c));
  EXPECT_EQ(hs::fingerprint(back), hs::fingerprint(c));
  EXPECT_EQ(hs::fingerprint(c).size(), 16u);
  hs::set_key(back, "agent.batch_size", "33");
  EXPECT_NE(hs::fingerprint(back), hs::fingerprint(c));
}

TEST(Config, EveryKeyIsDocumentedAndReadable) {
  const auto c = hs::default_config();
  for (const auto& key : hs::config_keys()) {
    EXPECT_FALSE(key.doc.empty()) << key.key;
    EXPECT_NO_THROW(hs::get_key(c, key.key)) << key.key;
  }
}

// --- logs and metrics --------------------------------------------------------

TEST(InteractionLog, RoundTripsExactly) {
  env::LogRecord r;
  r.step = 12;
  r.user_id = 12;
  r.item_id = 987654321;
  r.impression_count = 99;
  r.labels = {1.0, 0.0, 1.0, 7.0 / 9.0};
  r.watch_seconds = 73.12345678901234;
  r.video_length = 9.99;
  r.completed_count = 7;
  r.regret = 0.1 + 0.2;
  EXPECT_EQ(env::parse_log_record(env::format_log_record(r)), r);
  EXPECT_EQ(env::log_header().front(), '#');
  EXPECT_THROW(env::parse_log_record("1\t2\t3"), AnalysisError);
  EXPECT_THROW(env::parse_log_record("a\t2\t3\t4\t5\t6\t7\t8\t9\t10\t11\t12"), AnalysisError);
}

TEST(Buckets, HalfOpenAssignment) {
  const auto b = hs::BucketSpec::standard();
  EXPECT_EQ(b.index_of(0), 0u);
  EXPECT_EQ(b.index_of(99), 0u);
  EXPECT_EQ(b.index_of(100), 1u);
  EXPECT_EQ(b.index_of(9999), 8u);
  EXPECT_EQ(b.index_of(10000), 9u);
  EXPECT_EQ(b.index_of(1000000), 9u);
  EXPECT_EQ(b.hi(9), hs::kUnbounded);
  EXPECT_THROW(hs::BucketSpec({0, 10, 10}), ConfigError);
  EXPECT_THROW(hs::BucketSpec({5, 10}), ConfigError);
}

TEST(Metrics, CsvHeaderIsExact) {
  EXPECT_EQ(hs::metrics_csv_header(),
            "arm,seed,bucket_lo,bucket_hi,impressions,likes,completions,ws_sum,vvs_sum,cumulative_regret");
  EXPECT_EQ(hs::format_metrics_csv({}), hs::metrics_csv_header() + "\n");
}

TEST(Metrics, CsvRoundTrip) {
  std::vector<hs::MetricRow> rows = {row("treatment", 1, 0, 100, 10, 3), row("control", 2, 10000, hs::kUnbounded, 5, 0)};
  rows[0].ws_sum = 1.0 / 3.0;
  rows[1].cumulative_regret = -1e-300;
  EXPECT_EQ(hs::parse_metrics_csv(hs::format_metrics_csv(rows)), rows);

  std::vector<hs::SummaryRow> sums = {summary("treatment", 7, 123.456, 0.1 + 0.2)};
  sums[0].cumulative_regret = 2.0 / 3.0;
  EXPECT_EQ(hs::parse_summary_csv(hs::format_summary_csv(sums)), sums);
}

TEST(Metrics, MalformedCsvIsAnAnalysisError) {
  EXPECT_THROW(hs::parse_metrics_csv(""), AnalysisError);
  EXPECT_THROW(hs::parse_metrics_csv("arm,seed\n"), AnalysisError);
  EXPECT_THROW(hs::parse_metrics_csv(hs::metrics_csv_header() + "\ntreatment,1,0\n"), AnalysisError);
  EXPECT_THROW(hs::parse_metrics_csv(hs::metrics_csv_header() + "\ntreatment,x,0,100,1,1,1,1,1,1\n"), AnalysisError);
  EXPECT_THROW(hs::parse_summary_csv("nonsense\n"), AnalysisError);
}

TEST(Metrics, AccumulatorMatchesBruteForceRescan) {
  nn::Rng rng(3);
  std::vector<env::LogRecord> records;
  for (int i = 0; i < 2000; ++i) {
    env::LogRecord r;
    r.step = i / 4;
    r.impression_count = static_cast<long>(rng.uniform_index(15000));
    r.labels = {rng.bernoulli(0.6) ? 1.0 : 0.0, rng.bernoulli(0.1) ? 1.0 : 0.0, 0.0,
                static_cast<double>(rng.uniform_index(10)) / 9.0};
    r.completed_count = static_cast<int>(rng.uniform_index(3));
    r.regret = rng.uniform();
    records.push_back(r);
  }
  const auto spec = hs::BucketSpec::standard();
  hs::MetricAccumulator acc("treatment", 4, spec);
  for (const auto& r : records) acc.add(r);
  const auto rows = acc.rows();

  // Independent scan: linear search over boundaries.
  std::map<long, hs::MetricRow> oracle;
  const auto& b = spec.boundaries();
  for (const auto& r : records) {
    std::size_t k = 0;
    while (k + 1 < b.size() && r.impression_count >= b[k + 1]) ++k;
    auto& o = oracle[b[k]];
    o.impressions += 1;
    o.likes += r.labels[1] > 0.5;
    o.completions += r.completed_count >= 1;
    o.ws_sum += r.labels[0];
    o.vvs_sum += r.labels[3];
    o.cumulative_regret += r.regret;
  }
  ASSERT_EQ(rows.size(), oracle.size());
  long total = 0;
  for (const auto& r : rows) {
    const auto& o = oracle.at(r.bucket_lo);
    EXPECT_EQ(r.arm, "treatment");
    EXPECT_EQ(r.seed, 4u);
    EXPECT_EQ(r.impressions, o.impressions);
    EXPECT_EQ(r.likes, o.likes);
    EXPECT_EQ(r.completions, o.completions);
    EXPECT_NEAR(r.ws_sum, o.ws_sum, 1e-9);
    EXPECT_NEAR(r.vvs_sum, o.vvs_sum, 1e-9);
    EXPECT_NEAR(r.cumulative_regret, o.cumulative_regret, 1e-9);
    total += r.impressions;
  }
  EXPECT_EQ(total, 2000);
}

// --- experiments -------------------------------------------------------------

TEST(Experiment, MetricsAgreeWithTheLogsAndSummaries) {
  const auto dir = scratch_dir("logs_agree");
  const auto config = tiny_config(dir);
  hs::RunOptions options;
  options.threads = 1;
  const auto result = hs::run_experiment(config, options);
  ASSERT_EQ(result.summaries.size(), 6u);

  for (const auto& s : result.summaries) {
    const auto path = dir / "logs" / (s.arm + "_seed" + std::to_string(s.seed) + ".tsv");
    std::istringstream log(hs::read_text_file(path));
    std::string line;
    hs::MetricAccumulator acc(s.arm, s.seed, hs::BucketSpec(config.run.bucket_boundaries));
    long served = 0;
    double regret = 0.0;
    while (std::getline(log, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto r = env::parse_log_record(line);
      acc.add(r);
      regret += r.regret;
      ++served;
    }
    EXPECT_EQ(served, s.impressions);
    EXPECT_NEAR(regret, s.cumulative_regret, 1e-9 * (1.0 + std::abs(s.cumulative_regret)));

    std::vector<hs::MetricRow> expected = acc.rows();
    std::vector<hs::MetricRow> got;
    for (const auto& m : result.metrics)
      if (m.arm == s.arm && m.seed == s.seed) got.push_back(m);
    EXPECT_EQ(got, expected);

    long total = 0;
    for (const auto& m : got) total += m.impressions;
    EXPECT_EQ(total, s.impressions);
  }
  EXPECT_EQ(hs::parse_metrics_csv(hs::read_text_file(dir / "metrics.csv")), result.metrics);
  EXPECT_EQ(hs::parse_summary_csv(hs::read_text_file(dir / "summary.csv")), result.summaries);
  fs::remove_all(dir);
}

TEST(Experiment, RepeatRunsAreByteIdentical) {
  const auto dir = scratch_dir("repeat");
  const auto config = tiny_config(dir);
  hs::RunOptions one;
  one.threads = 1;
  hs::run_experiment(config, one);
  const auto metrics = hs::read_text_file(dir / "metrics.csv");
  const auto manifest = hs::read_text_file(dir / "manifest.json");
  const auto log = hs::read_text_file(dir / "logs" / "treatment_seed2.tsv");
  hs::RunOptions many;
  many.threads = 3;
  hs::run_experiment(config, many);
  EXPECT_EQ(hs::read_text_file(dir / "metrics.csv"), metrics);
  EXPECT_EQ(hs::read_text_file(dir / "manifest.json"), manifest);
  EXPECT_EQ(hs::read_text_file(dir / "logs" / "treatment_seed2.tsv"), log);
  fs::remove_all(dir);
}

TEST(Experiment, PermutingSeedsPermutesRowsOnly) {
  auto a = tiny_config(scratch_dir("perm_a"));
  auto b = a;
  b.run.seeds = {3, 1, 2};
  hs::RunOptions options;
  options.write_files = false;
  options.threads = 1;
  const auto ra = hs::run_experiment(a, options);
  const auto rb = hs::run_experiment(b, options);
  std::map<std::pair<std::string, std::uint64_t>, hs::SummaryRow> sa, sb;
  for (const auto& s : ra.summaries) sa[{s.arm, s.seed}] = s;
  for (const auto& s : rb.summaries) sb[{s.arm, s.seed}] = s;
  EXPECT_EQ(sa, sb);
  auto ma = ra.metrics, mb = rb.metrics;
  const auto key = [](const hs::MetricRow& r) { return std::tie(r.seed, r.arm, r.bucket_lo); };
  std::sort(ma.begin(), ma.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
  std::sort(mb.begin(), mb.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
  EXPECT_EQ(ma, mb);
  EXPECT_EQ(rb.summaries.front().seed, 3u);
}

TEST(Experiment, ZeroHorizonWritesHeadersAndManifest) {
  const auto dir = scratch_dir("zero");
  auto config = tiny_config(dir);
  config.run.horizon = 0;
  hs::RunOptions options;
  options.threads = 1;
  const auto result = hs::run_experiment(config, options);
  EXPECT_TRUE(result.metrics.empty());
  EXPECT_EQ(hs::read_text_file(dir / "metrics.csv"), hs::metrics_csv_header() + "\n");
  const auto manifest = nlohmann::json::parse(hs::read_text_file(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("config_fingerprint").get<std::string>(), hs::fingerprint(config));
  EXPECT_EQ(manifest.at("seeds").size(), 3u);
  EXPECT_TRUE(manifest.at("seeds")[0].contains("env_root"));
  fs::remove_all(dir);
}

TEST(Experiment, InvalidConfigIsRejectedBeforeRunning) {
  const auto dir = scratch_dir("invalid");
  auto config = tiny_config(dir);
  config.run.seeds.clear();
  EXPECT_THROW(hs::run_experiment(config), ConfigError);
  EXPECT_FALSE(fs::exists(dir / "metrics.csv"));
}

TEST(Experiment, ArmsShareTheEnvironmentStream) {
  const auto config = tiny_config(scratch_dir("shared"));
  std::ostringstream a, b;
  hs::run_arm(config, hs::kTreatmentArm, epinet_bandit::agents::AgentKind::kGreedyPoint, 5, &a);
  hs::run_arm(config, hs::kControlArm, epinet_bandit::agents::AgentKind::kGreedyPoint, 5, &b);
  EXPECT_EQ(a.str(), b.str());
  const auto roots = hs::seed_roots(5);
  EXPECT_NE(roots.env_root, roots.agent_root);
}

// --- comparison --------------------------------------------------------------

TEST(Statistics, StudentTQuantilesMatchTables) {
  // Reference values from the standard t table.
  EXPECT_NEAR(hs::student_t_quantile(0.975, 19), 2.093024054408263, 1e-9);
  EXPECT_NEAR(hs::student_t_quantile(0.95, 7), 1.894578605061305, 1e-9);
}

TEST(Statistics, PairedTTestMatchesReference) {
  const std::vector<double> t = {1.2, 0.7, 2.1, 1.5, 0.3, 1.9, 1.1, 0.8};
  const std::vector<double> c = {1.0, 0.9, 1.4, 1.2, 0.5, 1.3, 1.2, 0.4};
  const auto r = hs::paired_t_test_greater(t, c);
  // Frozen from an independent statistics package (one-sided paired test).
  EXPECT_NEAR(r.t_statistic, 1.7061041489037163, 1e-9);
  EXPECT_NEAR(r.p_value, 0.06587714725368078, 1e-9);
  EXPECT_EQ(r.n, 8u);
  EXPECT_THROW(hs::paired_t_test_greater(std::vector<double>{1.0}, std::vector<double>{2.0}), AnalysisError);
}

TEST(Statistics, BootstrapAgreesWithTheTIntervalOnGaussianData) {
  nn::Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> values(40);
    for (auto& v : values) v = 3.0 + 2.0 * rng.normal();
    const auto t = hs::t_interval_mean(values, 0.95);
    const auto b = hs::bootstrap_mean_ci(values, 0.95, 10000, rng);
    const double half = (t.hi - t.lo) / 2.0;
    EXPECT_NEAR(b.lo, t.lo, 0.1 * half);
    EXPECT_NEAR(b.hi, t.hi, 0.1 * half);
  }
}

TEST(Statistics, ConstantDataGivesADegenerateInterval) {
  nn::Rng rng(12);
  const std::vector<double> v(10, 4.0);
  const auto b = hs::bootstrap_mean_ci(v, 0.95, 1000, rng);
  EXPECT_EQ(b.lo, 4.0);
  EXPECT_EQ(b.hi, 4.0);
  EXPECT_THROW(hs::t_interval_mean(v, 1.5), AnalysisError);
}

TEST(Compare, IdenticalArmsShowNoChange) {
  std::vector<hs::MetricRow> metrics;
  std::vector<hs::SummaryRow> sums;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const char* arm : {hs::kTreatmentArm, hs::kControlArm}) {
      metrics.push_back(row(arm, seed, 0, 100, 50 + 10 * static_cast<long>(seed), static_cast<long>(seed)));
      metrics.push_back(row(arm, seed, 100, 200, 30, 2));
      sums.push_back(summary(arm, seed, 100.0 + static_cast<double>(seed), 0.5));
    }
  }
  for (auto method : {hs::CiMethod::kBootstrap, hs::CiMethod::kTInterval}) {
    hs::CompareOptions options;
    options.method = method;
    const auto c = hs::compare_arms(metrics, sums, options);
    for (const auto& r : c.rows) {
      EXPECT_EQ(r.pct_change, 0.0) << r.metric;
      EXPECT_LE(r.ci_lo, 0.0) << r.metric;
      EXPECT_GE(r.ci_hi, 0.0) << r.metric;
      EXPECT_FALSE(r.significant) << r.metric;
    }
    EXPECT_EQ(c.reward_test.mean_difference, 0.0);
  }
}

TEST(Compare, DoubledLikesAreAHundredPercentIncrease) {
  std::vector<hs::MetricRow> metrics;
  std::vector<hs::SummaryRow> sums;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const long likes = 3 + static_cast<long>(seed);
    metrics.push_back(row(hs::kTreatmentArm, seed, 0, 100, 100, 2 * likes));
    metrics.push_back(row(hs::kControlArm, seed, 0, 100, 100, likes));
    sums.push_back(summary(hs::kTreatmentArm, seed, 10.0, 0.5));
    sums.push_back(summary(hs::kControlArm, seed, 9.0, 0.6));
  }
  const auto c = hs::compare_arms(metrics, sums);
  const auto& like = find_row(c, "like_rate", 0);
  EXPECT_NEAR(like.pct_change, 100.0, 1e-12);
  EXPECT_EQ(like.n_seeds, 4u);
  EXPECT_TRUE(like.significant);
  EXPECT_NEAR(find_row(c, "completion_rate", 0).pct_change, 0.0, 1e-12);
  EXPECT_NEAR(c.reward_test.mean_difference, 1.0, 1e-12);
  EXPECT_NEAR(c.treatment_late_regret, 0.5, 1e-12);
  EXPECT_NEAR(c.control_late_regret, 0.6, 1e-12);
}

TEST(Compare, RatesAreRatiosOfSumsThenSeedAverages) {
  std::vector<hs::MetricRow> metrics = {
      row(hs::kTreatmentArm, 1, 0, 100, 10, 1), row(hs::kTreatmentArm, 2, 0, 100, 1000, 300),
      row(hs::kControlArm, 1, 0, 100, 10, 1),   row(hs::kControlArm, 2, 0, 100, 1000, 100),
  };
  std::vector<hs::SummaryRow> sums = {summary(hs::kTreatmentArm, 1, 1, 0), summary(hs::kTreatmentArm, 2, 1, 0),
                                      summary(hs::kControlArm, 1, 1, 0), summary(hs::kControlArm, 2, 1, 0)};
  const auto& r = find_row(hs::compare_arms(metrics, sums), "like_rate", 0);
  EXPECT_NEAR(r.treatment, (0.1 + 0.3) / 2.0, 1e-12);
  EXPECT_NEAR(r.control, (0.1 + 0.1) / 2.0, 1e-12);
  EXPECT_NEAR(r.pct_change, 100.0, 1e-9);
}

TEST(Compare, MissingBucketsAreZeroImpressionsButNoRate) {
  std::vector<hs::MetricRow> metrics;
  std::vector<hs::SummaryRow> sums;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    metrics.push_back(row(hs::kTreatmentArm, seed, 0, 100, 60, 6));
    metrics.push_back(row(hs::kTreatmentArm, seed, 100, 200, 40, 4));
    metrics.push_back(row(hs::kControlArm, seed, 0, 100, 100, 10));
    sums.push_back(summary(hs::kTreatmentArm, seed, 1, 0));
    sums.push_back(summary(hs::kControlArm, seed, 1, 0));
  }
  const auto c = hs::compare_arms(metrics, sums);
  const auto& rate = find_row(c, "like_rate", 100);
  EXPECT_EQ(rate.n_seeds, 0u);
  EXPECT_TRUE(std::isnan(rate.ci_lo));
  const auto& share = find_row(c, "impression_share", 0);
  EXPECT_NEAR(share.treatment, 0.6, 1e-12);
  EXPECT_NEAR(share.control, 1.0, 1e-12);
  EXPECT_NEAR(share.pct_change, -40.0, 1e-9);
  const auto& imps = find_row(c, "impressions", 100);
  EXPECT_NEAR(imps.control, 0.0, 1e-12);
  EXPECT_NEAR(imps.treatment, 40.0, 1e-12);
  EXPECT_EQ(hs::impression_shares(metrics, hs::kTreatmentArm, std::vector<std::uint64_t>{1, 2}, 0),
            (std::vector<double>{0.6, 0.6}));
}

TEST(Compare, AnalysisErrors) {
  std::vector<hs::MetricRow> metrics = {row(hs::kTreatmentArm, 1, 0, 100, 10, 1)};
  std::vector<hs::SummaryRow> only_treatment = {summary(hs::kTreatmentArm, 1, 1, 0),
                                                summary(hs::kTreatmentArm, 2, 1, 0)};
  EXPECT_THROW(hs::compare_arms(metrics, only_treatment), AnalysisError);
  std::vector<hs::SummaryRow> one_seed = {summary(hs::kTreatmentArm, 1, 1, 0), summary(hs::kControlArm, 1, 1, 0)};
  EXPECT_THROW(hs::compare_arms(metrics, one_seed), AnalysisError);
  EXPECT_THROW(hs::compare_run("/nonexistent/run/dir"), AnalysisError);
  EXPECT_THROW(hs::ci_method_from_string("jackknife"), ConfigError);
}

TEST(Compare, CsvRoundTripAndRunDirectory) {
  const auto dir = scratch_dir("compare_run");
  const auto config = tiny_config(dir);
  hs::RunOptions options;
  options.threads = 1;
  hs::run_experiment(config, options);
  hs::CompareOptions co;
  co.resamples = 500;
  const auto c = hs::compare_run(dir, co);
  EXPECT_FALSE(c.rows.empty());
  const auto parsed = hs::parse_comparison_csv(hs::format_comparison_csv(c));
  ASSERT_EQ(parsed.size(), c.rows.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    EXPECT_EQ(parsed[i].metric, c.rows[i].metric);
    EXPECT_EQ(parsed[i].bucket_lo, c.rows[i].bucket_lo);
    EXPECT_EQ(parsed[i].significant, c.rows[i].significant);
    if (std::isfinite(c.rows[i].pct_change)) {
      EXPECT_EQ(parsed[i].pct_change, c.rows[i].pct_change);
    }
  }
  EXPECT_FALSE(hs::format_comparison_table(c).empty());
  fs::remove_all(dir);
}

// --- charts ------------------------------------------------------------------

TEST(Charts, GapsAxisAndDeterminism) {
  hs::ComparisonRow a{"like_rate", 0, 100, 5, 0.1, 0.08, 25.0, -37.0, 81.0, false};
  hs::ComparisonRow gap{"like_rate", 100, 200, 0, NAN, NAN, NAN, NAN, NAN, false};
  hs::ComparisonRow c{"like_rate", 200, hs::kUnbounded, 5, 0.1, 0.1, -5.0, -8.0, -2.0, true};
  const std::vector<hs::ComparisonRow> rows = {a, gap, c};
  const auto svg = hs::render_chart_svg("Likes", rows);
  EXPECT_EQ(svg, hs::render_chart_svg("Likes", rows));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("n/a"), std::string::npos);
  EXPECT_NE(svg.find("[200,inf)"), std::string::npos);
  // Two drawn bars plus the background; the gap draws none.
  std::size_t rects = 0;
  for (auto pos = svg.find("<rect"); pos != std::string::npos; pos = svg.find("<rect", pos + 1)) ++rects;
  EXPECT_EQ(rects, 3u);

  // Tick labels are the right-aligned text nodes.
  const std::regex tick(R"re(text-anchor="end">(-?[0-9.]+)<)re");
  double lo = 1e9, hi = -1e9;
  for (std::sregex_iterator it(svg.begin(), svg.end(), tick), end; it != end; ++it) {
    const double v = std::stod((*it)[1]);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LE(lo, -37.0);
  EXPECT_GE(hi, 81.0);
}

TEST(Charts, EmitsOneFilePerMetric) {
  const auto dir = scratch_dir("charts");
  hs::Comparison c;
  c.rows.push_back({"impression_share", 0, 100, 3, 0.5, 0.4, 25.0, 10.0, 40.0, true});
  const auto paths = hs::emit_charts(c, dir);
  EXPECT_EQ(paths.size(), hs::comparison_metrics().size());
  for (const auto& p : paths) EXPECT_TRUE(fs::exists(p)) << p;
  const auto first = hs::read_text_file(dir / "impression_share.svg");
  hs::emit_charts(c, dir);
  EXPECT_EQ(hs::read_text_file(dir / "impression_share.svg"), first);
  fs::remove_all(dir);
}

// --- gradcheck and calibration ----------------------------------------------

TEST(Gradcheck, PassesAndListsEveryTensor) {
  const auto report = hs::run_gradcheck({});
  EXPECT_TRUE(report.passed()) << report.format();
  bool saw_prior = false, saw_tower = false, saw_control = false;
  for (const auto& t : report.tensors) {
    saw_prior |= t.parameter.find("prior") != std::string::npos;
    saw_tower |= t.parameter.find("user_tower") != std::string::npos;
    saw_control |= t.parameter.find("control/") != std::string::npos;
    if (t.count > 0 && t.parameter.find("prior") == std::string::npos) {
      EXPECT_LT(t.max_rel_error, 1e-4) << t.parameter;
    }
  }
  EXPECT_TRUE(saw_prior);
  EXPECT_TRUE(saw_tower);
  EXPECT_TRUE(saw_control);
}

TEST(Gradcheck, InjectedFaultIsReported) {
  hs::GradcheckOptions options;
  options.inject_fault = "epinet_learnable/layer0/weight";
  const auto report = hs::run_gradcheck(options);
  EXPECT_FALSE(report.passed());
  std::size_t failed = 0;
  for (const auto& t : report.tensors) {
    if (!t.passed) {
      ++failed;
      EXPECT_NE(t.parameter.find("epinet_learnable/layer0/weight"), std::string::npos);
    }
  }
  EXPECT_GT(failed, 0u);
  EXPECT_NE(report.format().find("FAIL"), std::string::npos);
}

TEST(Calibration, HitsTheLikeRateTarget) {
  auto config = hs::default_config();
  config.calibration.serves = 20000;
  config.calibration.like_rate_target = 0.02;
  const auto result = hs::calibrate(config, 3);
  EXPECT_NEAR(result.achieved.like, 0.02, 0.005);
  EXPECT_EQ(result.achieved.serves, 20000);
  EXPECT_LT(result.like_bias, config.env.truth.like_bias + 2.0);
}
