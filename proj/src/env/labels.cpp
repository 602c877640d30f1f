#include "epinet_bandit/env/labels.h"

#include <algorithm>
#include <cmath>

namespace epinet_bandit::env {

int watch_score(double video_length, double watch_seconds, int completed_count) {
  if (video_length < 10.0) return completed_count > 1 ? 1 : 0;
  if (video_length < 20.0) return completed_count >= 1 ? 1 : 0;
  return watch_seconds >= 20.0 ? 1 : 0;
}

double vvs(double watch_seconds) {
  const double tens = std::floor(std::max(watch_seconds, 0.0) / 10.0);
  const int k = static_cast<int>(std::min(tens, 9.0));
  return static_cast<double>(k) / 9.0;
}

}  // namespace epinet_bandit::env
