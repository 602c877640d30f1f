#pragma once

#include <string>
#include <string_view>

#include "epinet_bandit/env/environment.h"

namespace epinet_bandit::env {

// One line of the interaction log. Tab-separated, fixed column order:
//   step user item impressions ws like share vvs watch_seconds video_length completed regret
// Reals are written with 17 significant digits so parsing restores them exactly.
// `regret` is this slot's share of the step regret: oracle/M - E[reward of item].
struct LogRecord {
  long step = 0;
  std::uint64_t user_id = 0;
  ItemId item_id = 0;
  long impression_count = 0;
  Labels labels{};
  double watch_seconds = 0.0;
  double video_length = 0.0;
  int completed_count = 0;
  double regret = 0.0;

  bool operator==(const LogRecord&) const = default;
};

// Header line, starting with '#'.
std::string log_header();
std::string format_log_record(const LogRecord& record);
// Throws AnalysisError on malformed input.
LogRecord parse_log_record(std::string_view line);

LogRecord make_log_record(const Interaction& interaction, double regret_share);

}  // namespace epinet_bandit::env
