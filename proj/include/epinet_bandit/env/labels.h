#pragma once

namespace epinet_bandit::env {

// Watch score:
//   length < 10s         -> 1 if the video was completed more than once
//   10s <= length < 20s  -> 1 if the video was completed
//   length >= 20s        -> 1 if at least 20s were watched
//   otherwise 0
int watch_score(double video_length, double watch_seconds, int completed_count);

// Video view seconds label: 0 below 10s, k/9 on [10k, 10(k+1)) for k = 1..8,
// 1 from 90s on.
double vvs(double watch_seconds);

}  // namespace epinet_bandit::env
