#pragma once

#include <algorithm>
#include <chrono>
#include <vector>

#include "seqrec/evaluation.hpp"
#include "seqrec/model.hpp"

namespace seqrec {

// Median wall-clock seconds of one full ranking pass (forward, score every
// candidate, take the top k) over `reps` repetitions, warm caches.
inline double inference_latency(const ModelParams& params, const HyperParams& hyper,
                                UserId user, std::span<const ItemId> context, int k,
                                int reps) {
  std::vector<double> scores(params.num_items + 1);
  volatile ItemId sink = 0;  // keep the ranking from being optimized out
  for (int warm = 0; warm < 2; ++warm) {
    ForwardState st = forward(params, hyper, context);
    score_all(params, hyper, user, st, scores);
    sink = top_k(scores, static_cast<std::size_t>(k)).front();
  }
  std::vector<double> times(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    ForwardState st = forward(params, hyper, context);
    score_all(params, hyper, user, st, scores);
    sink = top_k(scores, static_cast<std::size_t>(k)).front();
    auto t1 = std::chrono::steady_clock::now();
    times[static_cast<std::size_t>(r)] = std::chrono::duration<double>(t1 - t0).count();
  }
  (void)sink;
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

}  // namespace seqrec
