#include "epinet_bandit/harness/charts.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "epinet_bandit/harness/experiment.h"

namespace epinet_bandit::harness {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 70.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string bucket_label(const ComparisonRow& r) {
  const auto bound = [](long v) {
    if (v == kUnbounded) return std::string("inf");
    if (v >= 1000 && v % 1000 == 0) return std::to_string(v / 1000) + "k";
    return std::to_string(v);
  };
  return "[" + bound(r.bucket_lo) + "," + bound(r.bucket_hi) + ")";
}

std::string pretty_title(const std::string& metric) {
  if (metric == "like_rate") return "Likes per impression";
  if (metric == "completion_rate") return "Completions per impression";
  if (metric == "ws_rate") return "Watch score per impression";
  if (metric == "vvs_rate") return "Video view seconds score per impression";
  if (metric == "impressions") return "Impressions";
  if (metric == "impression_share") return "Share of impressions";
  return metric;
}

// Rounds the axis step to 1, 2 or 5 times a power of ten.
double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f <= 1.0 ? 1.0 : f <= 2.0 ? 2.0 : f <= 5.0 ? 5.0 : 10.0) * mag;
}

}  // namespace

std::string render_chart_svg(const std::string& title, const std::vector<ComparisonRow>& rows) {
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& r : rows) {
    for (double v : {r.pct_change, r.ci_lo, r.ci_hi}) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double step = nice_step(hi - lo);
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto y_of = [&](double v) { return kTop + (hi - v) / (hi - lo) * plot_h; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + title +
         " (% change, treatment vs control)</text>\n";

  for (double v = lo; v <= hi + step / 2; v += step) {
    const double y = y_of(v);
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kWidth - kRight) + "\" y2=\"" + num(y) +
           "\" stroke=\"#e0e0e0\"/>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + num(v) + "</text>\n";
  }
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y_of(0.0)) + "\" x2=\"" + num(kWidth - kRight) + "\" y2=\"" +
         num(y_of(0.0)) + "\" stroke=\"black\"/>\n";

  const double slot = rows.empty() ? plot_w : plot_w / static_cast<double>(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double cx = kLeft + slot * (static_cast<double>(i) + 0.5);
    svg += "<text x=\"" + num(cx) + "\" y=\"" + num(kHeight - kBottom + 16) +
           "\" text-anchor=\"middle\" font-size=\"10\">" + bucket_label(r) + "</text>\n";
    if (!std::isfinite(r.pct_change)) {
      svg += "<text x=\"" + num(cx) + "\" y=\"" + num(y_of(0.0) - 4) +
             "\" text-anchor=\"middle\" fill=\"#999\">n/a</text>\n";
      continue;
    }
    const double bar_w = slot * 0.6;
    const double y0 = y_of(0.0);
    const double y1 = y_of(r.pct_change);
    const char* fill = r.significant ? "#3b6fb6" : "#9fb7d9";
    svg += "<rect x=\"" + num(cx - bar_w / 2) + "\" y=\"" + num(std::min(y0, y1)) + "\" width=\"" + num(bar_w) +
           "\" height=\"" + num(std::abs(y1 - y0)) + "\" fill=\"" + fill + "\"/>\n";
    if (std::isfinite(r.ci_lo) && std::isfinite(r.ci_hi)) {
      const double ylo = y_of(r.ci_lo);
      const double yhi = y_of(r.ci_hi);
      const double cap = bar_w / 4;
      svg += "<line x1=\"" + num(cx) + "\" y1=\"" + num(ylo) + "\" x2=\"" + num(cx) + "\" y2=\"" + num(yhi) +
             "\" stroke=\"black\"/>\n";
      for (double y : {ylo, yhi})
        svg += "<line x1=\"" + num(cx - cap) + "\" y1=\"" + num(y) + "\" x2=\"" + num(cx + cap) + "\" y2=\"" + num(y) +
               "\" stroke=\"black\"/>\n";
    }
  }
  svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 20) +
         "\" text-anchor=\"middle\">impressions of the item at serve time</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::vector<std::filesystem::path> emit_charts(const Comparison& comparison, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const auto& metric : comparison_metrics()) {
    std::vector<ComparisonRow> rows;
    for (const auto& r : comparison.rows)
      if (r.metric == metric) rows.push_back(r);
    const auto path = dir / (metric + ".svg");
    write_text_file(path, render_chart_svg(pretty_title(metric), rows));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace epinet_bandit::harness
