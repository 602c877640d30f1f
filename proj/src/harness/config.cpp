#include "epinet_bandit/harness/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "epinet_bandit/errors.h"
#include "epinet_bandit/nn/rng.h"

namespace epinet_bandit::harness {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> parts;
  text = trim(text);
  if (text.empty()) return parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    parts.push_back(trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parts;
}

template <typename T>
T parse_scalar(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ConfigError("missing value");
  if constexpr (std::is_unsigned_v<T>) {
    if (text.front() == '-') throw ConfigError("negative value '" + std::string(text) + "'");
  }
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("cannot parse '" + std::string(text) + "' as a number");
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Per-type text codec.
void parse_into(std::string_view t, std::size_t& out) { out = parse_scalar<std::size_t>(t); }
void parse_into(std::string_view t, long& out) { out = parse_scalar<long>(t); }
void parse_into(std::string_view t, double& out) { out = parse_scalar<double>(t); }
void parse_into(std::string_view t, std::string& out) { out = std::string(trim(t)); }
void parse_into(std::string_view t, bool& out) {
  t = trim(t);
  if (t == "true" || t == "1") {
    out = true;
  } else if (t == "false" || t == "0") {
    out = false;
  } else {
    throw ConfigError("cannot parse '" + std::string(t) + "' as a boolean");
  }
}
void parse_into(std::string_view t, agents::AgentKind& out) { out = agents::agent_kind_from_string(trim(t)); }
void parse_into(std::string_view t, model::Task& out) { out = model::task_from_string(trim(t)); }
void parse_into(std::string_view t, nn::OptimizerKind& out) {
  t = trim(t);
  if (t == "sgd") {
    out = nn::OptimizerKind::kSgd;
  } else if (t == "adam") {
    out = nn::OptimizerKind::kAdam;
  } else {
    throw ConfigError("unknown optimizer '" + std::string(t) + "' (sgd, adam)");
  }
}
template <typename T>
void parse_into(std::string_view t, std::vector<T>& out) {
  std::vector<T> values;
  for (auto part : split_list(t)) {
    T v{};
    parse_into(part, v);
    values.push_back(v);
  }
  out = std::move(values);
}
template <typename T, std::size_t N>
void parse_into(std::string_view t, std::array<T, N>& out) {
  const auto parts = split_list(t);
  if (parts.size() != N)
    throw ConfigError("expected " + std::to_string(N) + " comma-separated values, got " + std::to_string(parts.size()));
  for (std::size_t i = 0; i < N; ++i) parse_into(parts[i], out[i]);
}

std::string format_value(std::size_t v) { return std::to_string(v); }
std::string format_value(long v) { return std::to_string(v); }
std::string format_value(double v) { return format_double(v); }
std::string format_value(const std::string& v) { return v; }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(agents::AgentKind v) { return agents::to_string(v); }
std::string format_value(model::Task v) { return model::to_string(v); }
std::string format_value(nn::OptimizerKind v) { return v == nn::OptimizerKind::kAdam ? "adam" : "sgd"; }
template <typename Seq>
std::string format_seq(const Seq& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ", ";
    out += format_value(v);
  }
  return out;
}
template <typename T>
std::string format_value(const std::vector<T>& v) {
  return format_seq(v);
}
template <typename T, std::size_t N>
std::string format_value(const std::array<T, N>& v) {
  return format_seq(v);
}

struct Entry {
  KeyInfo info;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Access>
Entry field(std::string key, std::string doc, Access access) {
  return Entry{{std::move(key), std::move(doc)},
               [access](ExperimentConfig& c, std::string_view text) { parse_into(text, access(c)); },
               [access](const ExperimentConfig& c) { return format_value(access(const_cast<ExperimentConfig&>(c))); }};
}

#define EB_FIELD(key, doc, expr) field(key, doc, [](ExperimentConfig& c) -> auto& { return expr; })

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      EB_FIELD("env.num_items", "live pool size", c.env.num_items),
      EB_FIELD("env.slate_size", "items recommended per step", c.env.slate_size),
      EB_FIELD("env.impression_cap", "retire items at this many impressions (0 = off)", c.env.impression_cap),
      EB_FIELD("env.max_age", "retire items older than this many steps (0 = off)", c.env.max_age),
      EB_FIELD("env.refresh_per_step", "oldest items replaced by fresh ones each step", c.env.refresh_per_step),
      EB_FIELD("env.user_feature_dim", "observed user feature dimension", c.env.user_feature_dim),
      EB_FIELD("env.item_feature_dim", "observed item feature dimension (last entry is video length / 60)",
               c.env.item_feature_dim),
      EB_FIELD("env.latent_dim", "hidden user/item latent dimension", c.env.latent_dim),
      EB_FIELD("env.feature_noise", "std of observation noise on features", c.env.feature_noise),
      EB_FIELD("env.video_lengths", "video lengths in seconds, drawn uniformly", c.env.video_lengths),
      EB_FIELD("env.personalization", "weight of the user-item latent match in affinity",
               c.env.truth.personalization),
      EB_FIELD("env.quality_scale", "weight of item quality in affinity", c.env.truth.quality_scale),
      EB_FIELD("env.quality_sd", "std of ordinary item quality", c.env.truth.quality_sd),
      EB_FIELD("env.breakout_probability", "probability a new item is a breakout", c.env.truth.breakout_probability),
      EB_FIELD("env.breakout_boost", "quality added to breakout items", c.env.truth.breakout_boost),
      EB_FIELD("env.like_slope", "like logit slope on affinity", c.env.truth.like_slope),
      EB_FIELD("env.like_bias", "like logit bias", c.env.truth.like_bias),
      EB_FIELD("env.share_slope", "share logit slope on affinity", c.env.truth.share_slope),
      EB_FIELD("env.share_bias", "share logit bias", c.env.truth.share_bias),
      EB_FIELD("env.watch_log_mean", "log-scale mean of watch seconds at zero affinity", c.env.truth.watch_log_mean),
      EB_FIELD("env.watch_slope", "log-watch slope on affinity", c.env.truth.watch_slope),
      EB_FIELD("env.watch_log_sd", "log-scale std of watch seconds", c.env.truth.watch_log_sd),
      EB_FIELD("env.max_loops", "watch time is capped at this many plays of the video", c.env.truth.max_loops),
      EB_FIELD("env.reward_weights", "reward weights on (ws, like, share, vvs)", c.env.reward_weights),
      EB_FIELD("model.embedding_dim", "tower embedding dimension", c.agent.towers.embedding_dim),
      EB_FIELD("model.tower_hidden", "hidden widths of each tower", c.agent.towers.hidden),
      EB_FIELD("model.base_hidden", "hidden widths of the overarch base network", c.agent.head.base_hidden),
      EB_FIELD("model.epinet_hidden", "hidden widths of the learnable and prior epinet networks",
               c.agent.head.epinet_hidden),
      EB_FIELD("model.index_dim", "epistemic index dimension", c.agent.head.index_dim),
      EB_FIELD("model.prior_scale", "multiplier on the frozen prior network", c.agent.head.prior_scale),
      EB_FIELD("model.epinet_task", "label the epinet head predicts (ws, like, share, vvs)", c.agent.epinet_task),
      EB_FIELD("model.index_per_example", "draw one index per minibatch row instead of per minibatch",
               c.agent.index_per_example),
      EB_FIELD("model.control_weights", "greedy score weights on the per-task probabilities",
               c.agent.control_weights),
      EB_FIELD("agent.treatment", "treatment arm kind", c.treatment),
      EB_FIELD("agent.control", "control arm kind", c.control),
      EB_FIELD("agent.optimizer", "sgd or adam", c.agent.optimizer.kind),
      EB_FIELD("agent.learning_rate", "optimizer step size", c.agent.optimizer.learning_rate),
      EB_FIELD("agent.batch_size", "replay minibatch size", c.agent.batch_size),
      EB_FIELD("agent.train_every", "optimizer step every this many env steps (0 = never)", c.agent.train_every),
      EB_FIELD("agent.buffer_capacity", "replay buffer capacity (FIFO)", c.agent.buffer_capacity),
      EB_FIELD("agent.epsilon", "per-slot exploration probability for epsilon_greedy", c.agent.epsilon),
      EB_FIELD("agent.ensemble_size", "particles for ensemble_ts", c.agent.ensemble_size),
      EB_FIELD("run.horizon", "steps per (arm, seed)", c.run.horizon),
      EB_FIELD("run.seeds", "seed list", c.run.seeds),
      EB_FIELD("run.output_dir", "directory for manifest, metrics and logs", c.run.output_dir),
      EB_FIELD("run.log_interactions", "write per-interaction logs", c.run.log_interactions),
      EB_FIELD("run.bucket_boundaries", "impression-count bucket lower edges, ascending from 0",
               c.run.bucket_boundaries),
      EB_FIELD("run.final_window", "fraction of final steps summarized as late regret", c.run.final_window),
      EB_FIELD("run.ci_method", "bootstrap or t", c.run.ci_method),
      EB_FIELD("run.bootstrap_resamples", "bootstrap resamples", c.run.bootstrap_resamples),
      EB_FIELD("run.ci_level", "confidence level of reported intervals", c.run.ci_level),
      EB_FIELD("calibrate.like_rate_target", "target marginal like rate", c.calibration.like_rate_target),
      EB_FIELD("calibrate.share_rate_target", "target marginal share rate", c.calibration.share_rate_target),
      EB_FIELD("calibrate.serves", "random serves used to measure achieved rates", c.calibration.serves),
  };
  return entries;
}

#undef EB_FIELD

const Entry& find_entry(std::string_view key) {
  for (const auto& e : registry())
    if (e.info.key == key) return e;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = "invalid config:";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  for (std::uint64_t s = 1; s <= 20; ++s) c.run.seeds.push_back(s);
  c.agent.optimizer.learning_rate = 0.03;
  c.agent.head.prior_scale = 0.5;
  sync_derived(c);
  return c;
}

void apply_paper_preset(ExperimentConfig& c) {
  c.agent.towers.embedding_dim = 128;
  c.agent.head.base_hidden = {384, 256};
  c.agent.head.epinet_hidden = {384, 256};
  c.agent.head.index_dim = 5;
  sync_derived(c);
}

void sync_derived(ExperimentConfig& c) {
  c.agent.slate_size = c.env.slate_size;
  c.agent.towers.user_feature_dim = c.env.user_feature_dim;
  c.agent.towers.item_feature_dim = c.env.item_feature_dim;
  c.agent.towers.num_tasks = model::kNumTasks;
  c.agent.head.input_dim = model::overarch_input_dim(c.agent.towers.embedding_dim, c.agent.towers.num_tasks);
}

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = [] {
    std::vector<KeyInfo> out;
    for (const auto& e : registry()) out.push_back(e.info);
    return out;
  }();
  return keys;
}

void set_key(ExperimentConfig& config, std::string_view key, std::string_view value) {
  key = trim(key);
  const Entry& entry = find_entry(key);
  try {
    entry.set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
  sync_derived(config);
}

std::string get_key(const ExperimentConfig& config, std::string_view key) { return find_entry(trim(key)).get(config); }

void apply_config_text(ExperimentConfig& config, std::string_view text) {
  std::vector<std::string> errors;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    try {
      set_key(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(join_errors(errors));
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  apply_config_text(config, text.str());
}

std::string canonical_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& e : registry()) out += e.info.key + " = " + e.get(config) + "\n";
  return out;
}

std::string fingerprint(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(nn::fnv1a64(canonical_text(config))));
  return buf;
}

void validate(const ExperimentConfig& config) {
  std::vector<std::string> errors;
  const auto collect = [&](const auto& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  };
  collect([&] { env::validate(config.env); });
  for (auto kind : {config.treatment, config.control}) {
    collect([&] {
      agents::AgentConfig a = config.agent;
      a.kind = kind;
      agents::validate(a);
    });
  }
  const auto& r = config.run;
  if (r.horizon < 0) errors.push_back("run.horizon must be >= 0");
  if (r.seeds.empty()) errors.push_back("run.seeds must not be empty");
  for (std::size_t i = 0; i < r.seeds.size(); ++i)
    for (std::size_t j = i + 1; j < r.seeds.size(); ++j)
      if (r.seeds[i] == r.seeds[j]) errors.push_back("run.seeds contains duplicate " + std::to_string(r.seeds[i]));
  if (r.output_dir.empty()) errors.push_back("run.output_dir must not be empty");
  if (r.bucket_boundaries.empty() || r.bucket_boundaries.front() != 0)
    errors.push_back("run.bucket_boundaries must start at 0");
  for (std::size_t i = 1; i < r.bucket_boundaries.size(); ++i)
    if (r.bucket_boundaries[i] <= r.bucket_boundaries[i - 1])
      errors.push_back("run.bucket_boundaries must be strictly increasing");
  if (!(r.final_window > 0.0 && r.final_window <= 1.0)) errors.push_back("run.final_window must be in (0, 1]");
  if (r.ci_method != "bootstrap" && r.ci_method != "t") errors.push_back("run.ci_method must be bootstrap or t");
  if (r.bootstrap_resamples < 100) errors.push_back("run.bootstrap_resamples must be >= 100");
  if (!(r.ci_level > 0.0 && r.ci_level < 1.0)) errors.push_back("run.ci_level must be in (0, 1)");
  const auto& cal = config.calibration;
  if (!(cal.like_rate_target > 0.0 && cal.like_rate_target < 1.0))
    errors.push_back("calibrate.like_rate_target must be in (0, 1)");
  if (!(cal.share_rate_target > 0.0 && cal.share_rate_target < 1.0))
    errors.push_back("calibrate.share_rate_target must be in (0, 1)");
  if (cal.serves == 0) errors.push_back("calibrate.serves must be > 0");
  if (!errors.empty()) throw ConfigError(join_errors(errors));
}

}  // namespace epinet_bandit::harness
