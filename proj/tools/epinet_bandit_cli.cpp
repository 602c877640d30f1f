// Command-line entry point: run, compare, chart, gradcheck, calibrate, config.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epinet_bandit/errors.h"
#include "epinet_bandit/harness/calibrate.h"
#include "epinet_bandit/harness/charts.h"
#include "epinet_bandit/harness/compare.h"
#include "epinet_bandit/harness/config.h"
#include "epinet_bandit/harness/experiment.h"
#include "epinet_bandit/harness/gradcheck.h"

namespace eb = epinet_bandit;
namespace hs = epinet_bandit::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitAnalysis = 4;

struct ConfigArgs {
  std::string file;
  std::string preset;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.file, "key = value config file");
  cmd->add_option("--preset", args.preset, "named preset applied before the file (paper)");
  cmd->add_option("-s,--set", args.overrides, "override one key, e.g. --set run.horizon=1000");
}

hs::ExperimentConfig build_config(const ConfigArgs& args) {
  hs::ExperimentConfig config = hs::default_config();
  if (!args.preset.empty()) {
    if (args.preset != "paper") throw eb::ConfigError("unknown preset '" + args.preset + "' (paper)");
    hs::apply_paper_preset(config);
  }
  if (!args.file.empty()) hs::apply_config_file(config, args.file);
  std::string text;
  for (const auto& o : args.overrides) text += o + "\n";
  hs::apply_config_text(config, text);
  hs::validate(config);
  return config;
}

struct CompareArgs {
  std::string run_dir;
  std::string method = "bootstrap";
  std::size_t resamples = 10000;
  double level = 0.95;
};

hs::CompareOptions compare_options(const CompareArgs& args) {
  hs::CompareOptions options;
  options.method = hs::ci_method_from_string(args.method);
  options.resamples = args.resamples;
  options.level = args.level;
  return options;
}

void add_compare_options(CLI::App* cmd, CompareArgs& args) {
  cmd->add_option("run_dir", args.run_dir, "run directory written by `run`")->required();
  cmd->add_option("--ci", args.method, "interval method: bootstrap or t");
  cmd->add_option("--resamples", args.resamples, "bootstrap resamples");
  cmd->add_option("--level", args.level, "confidence level");
}

int cmd_run(const ConfigArgs& args, const std::string& output, std::size_t threads, bool quiet) {
  hs::ExperimentConfig config = build_config(args);
  if (!output.empty()) hs::set_key(config, "run.output_dir", output);
  hs::RunOptions options;
  options.threads = threads;
  if (!quiet) {
    options.on_task_done = [](const std::string& arm, std::uint64_t seed) {
      std::fprintf(stderr, "done %s seed %llu\n", arm.c_str(), static_cast<unsigned long long>(seed));
    };
  }
  const auto result = hs::run_experiment(config, options);
  std::printf("%s\n", hs::format_summary_csv(result.summaries).c_str());
  std::printf("wrote %s (fingerprint %s)\n", config.run.output_dir.c_str(), hs::fingerprint(config).c_str());
  return 0;
}

int cmd_compare(const CompareArgs& args) {
  const auto comparison = hs::compare_run(args.run_dir, compare_options(args));
  hs::write_text_file(std::filesystem::path(args.run_dir) / "comparison.csv", hs::format_comparison_csv(comparison));
  std::printf("%s", hs::format_comparison_table(comparison).c_str());
  return 0;
}

int cmd_chart(const CompareArgs& args, const std::string& out_dir) {
  const auto comparison = hs::compare_run(args.run_dir, compare_options(args));
  const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(args.run_dir) / "charts" : std::filesystem::path(out_dir);
  for (const auto& path : hs::emit_charts(comparison, dir)) std::printf("%s\n", path.string().c_str());
  return 0;
}

int cmd_gradcheck(const hs::GradcheckOptions& options) {
  const auto report = hs::run_gradcheck(options);
  std::printf("%s", report.format().c_str());
  std::printf("gradcheck %s\n", report.passed() ? "passed" : "FAILED");
  return report.passed() ? 0 : kExitNumerical;
}

int cmd_calibrate(const ConfigArgs& args, std::uint64_t seed) {
  const hs::ExperimentConfig config = build_config(args);
  const auto result = hs::calibrate(config, seed);
  std::printf("env.like_bias = %.6f\n", result.like_bias);
  std::printf("env.share_bias = %.6f\n", result.share_bias);
  const auto& a = result.achieved;
  std::printf("achieved over %ld random serves: like %.5f (target %.5f), share %.5f (target %.5f), "
              "ws %.4f, vvs %.4f, completion %.4f\n",
              a.serves, a.like, config.calibration.like_rate_target, a.share, config.calibration.share_rate_target,
              a.ws, a.vvs, a.completion);
  return 0;
}

int cmd_config(const ConfigArgs& args) {
  const hs::ExperimentConfig config = build_config(args);
  for (const auto& key : hs::config_keys())
    std::printf("# %s\n%s = %s\n", key.doc.c_str(), key.key.c_str(), hs::get_key(config, key.key).c_str());
  std::printf("# fingerprint %s\n", hs::fingerprint(config).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Epinet Thompson sampling vs greedy on a simulated cold-start recommender"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EPINET_BANDIT_VERSION);

  ConfigArgs run_args;
  std::string run_output;
  std::size_t run_threads = 0;
  bool run_quiet = false;
  auto* run = app.add_subcommand("run", "run treatment and control arms over all seeds");
  add_config_options(run, run_args);
  run->add_option("-o,--output", run_output, "output directory (overrides run.output_dir)");
  run->add_option("-j,--threads", run_threads, "parallel tasks (default EPINET_BANDIT_THREADS or all cores)");
  run->add_flag("-q,--quiet", run_quiet, "no per-task progress");

  CompareArgs compare_args;
  auto* compare = app.add_subcommand("compare", "per-bucket % change with intervals; writes comparison.csv");
  add_compare_options(compare, compare_args);

  CompareArgs chart_args;
  std::string chart_out;
  auto* chart = app.add_subcommand("chart", "SVG bar charts of the comparison");
  add_compare_options(chart, chart_args);
  chart->add_option("-o,--output", chart_out, "chart directory (default <run_dir>/charts)");

  hs::GradcheckOptions grad_options;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every trainable parameter");
  gradcheck->add_option("--inject-fault", grad_options.inject_fault,
                        "perturb the analytic gradient of parameters whose name contains this text");
  gradcheck->add_option("--seed", grad_options.seed, "seed for inputs and initialization");

  ConfigArgs cal_args;
  std::uint64_t cal_seed = 1;
  auto* calibrate = app.add_subcommand("calibrate", "fit like/share biases to the target marginal rates");
  add_config_options(calibrate, cal_args);
  calibrate->add_option("--seed", cal_seed, "seed for the calibration draws");

  ConfigArgs config_args;
  auto* config = app.add_subcommand("config", "print every config key with its effective value");
  add_config_options(config, config_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_args, run_output, run_threads, run_quiet);
    if (compare->parsed()) return cmd_compare(compare_args);
    if (chart->parsed()) return cmd_chart(chart_args, chart_out);
    if (gradcheck->parsed()) return cmd_gradcheck(grad_options);
    if (calibrate->parsed()) return cmd_calibrate(cal_args, cal_seed);
    if (config->parsed()) return cmd_config(config_args);
  } catch (const eb::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const eb::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const eb::AnalysisError& e) {
    std::fprintf(stderr, "analysis error: %s\n", e.what());
    return kExitAnalysis;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
