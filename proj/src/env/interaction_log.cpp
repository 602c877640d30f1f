#include "epinet_bandit/env/interaction_log.h"

#include <charconv>
#include <cstdio>
#include <vector>

#include "epinet_bandit/errors.h"

namespace epinet_bandit::env {
namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(std::string_view field) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw AnalysisError("bad numeric field '" + std::string(field) + "' in interaction log");
  return value;
}

}  // namespace

std::string log_header() {
  return "#step\tuser\titem\timpressions\tws\tlike\tshare\tvvs\twatch_seconds\tvideo_length\tcompleted\tregret";
}

std::string format_log_record(const LogRecord& r) {
  std::string out;
  out.reserve(160);
  out += std::to_string(r.step);
  out += '\t';
  out += std::to_string(r.user_id);
  out += '\t';
  out += std::to_string(r.item_id);
  out += '\t';
  out += std::to_string(r.impression_count);
  for (double label : r.labels) {
    out += '\t';
    out += fmt_real(label);
  }
  out += '\t';
  out += fmt_real(r.watch_seconds);
  out += '\t';
  out += fmt_real(r.video_length);
  out += '\t';
  out += std::to_string(r.completed_count);
  out += '\t';
  out += fmt_real(r.regret);
  return out;
}

LogRecord parse_log_record(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (fields.size() != 12)
    throw AnalysisError("interaction log line has " + std::to_string(fields.size()) + " fields, expected 12");
  LogRecord r;
  r.step = parse_number<long>(fields[0]);
  r.user_id = parse_number<std::uint64_t>(fields[1]);
  r.item_id = parse_number<ItemId>(fields[2]);
  r.impression_count = parse_number<long>(fields[3]);
  for (std::size_t k = 0; k < kNumLabels; ++k) r.labels[k] = parse_number<double>(fields[4 + k]);
  r.watch_seconds = parse_number<double>(fields[8]);
  r.video_length = parse_number<double>(fields[9]);
  r.completed_count = parse_number<int>(fields[10]);
  r.regret = parse_number<double>(fields[11]);
  return r;
}

LogRecord make_log_record(const Interaction& it, double regret_share) {
  return LogRecord{it.step,          it.user_id,      it.item_id,         it.impression_count, it.labels,
                   it.watch_seconds, it.video_length, it.completed_count, regret_share};
}

}  // namespace epinet_bandit::env
