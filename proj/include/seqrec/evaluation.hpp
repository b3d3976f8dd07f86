#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <span>
#include <unordered_set>
#include <vector>

#include "seqrec/errors.hpp"
#include "seqrec/model.hpp"
#include "seqrec/split.hpp"

namespace seqrec {

// Top k admissible item ids by score, descending, ties broken by ascending
// id. `scores` covers all embedding rows; the final row (pad) is never
// admissible, nor is anything in `exclude`.
inline std::vector<ItemId> top_k(std::span<const double> scores, std::size_t k,
                                 const std::unordered_set<ItemId>& exclude = {}) {
  std::vector<ItemId> ids;
  ids.reserve(scores.size());
  for (std::size_t j = 0; j + 1 < scores.size(); ++j) {
    ItemId id = static_cast<ItemId>(j);
    if (!exclude.contains(id)) ids.push_back(id);
  }
  if (k > ids.size()) {
    throw DataError("top_k: k = " + std::to_string(k) + " but only " +
                    std::to_string(ids.size()) + " admissible items");
  }
  auto better = [&](ItemId a, ItemId b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    better);
  ids.resize(k);
  return ids;
}

inline double recall_at_k(std::span<const ItemId> recommended,
                          const std::unordered_set<ItemId>& truth) {
  if (truth.empty()) throw DataError("recall_at_k: empty ground truth");
  std::size_t hits = 0;
  for (ItemId id : recommended) {
    if (truth.contains(id)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// Binary-gain NDCG: hits at 1-indexed position i contribute 1/log2(i+1);
// the ideal ranking packs min(k, |truth|) hits at the top.
inline double ndcg_at_k(std::span<const ItemId> recommended,
                        const std::unordered_set<ItemId>& truth) {
  if (truth.empty()) throw DataError("ndcg_at_k: empty ground truth");
  double dcg = 0.0;
  for (std::size_t i = 0; i < recommended.size(); ++i) {
    if (truth.contains(recommended[i])) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  double idcg = 0.0;
  std::size_t ideal = std::min(recommended.size(), truth.size());
  for (std::size_t i = 0; i < ideal; ++i) {
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

enum class EvalRange { Validation, Test };

struct EvalOptions {
  std::vector<int> ks = {5, 10};
  bool exclude_seen = false;     // mask the user's history from the candidate pool
  bool measure_latency = false;  // single-threaded wall-clock per user
  EvalRange range = EvalRange::Test;
};

struct EvalResult {
  struct PerK {
    int k = 0;
    double recall = 0.0;
    double ndcg = 0.0;
  };
  std::vector<PerK> per_k;
  double latency_mean_seconds = 0.0;
  std::size_t users_evaluated = 0;
};

// Ranks all items for every user with a non-empty target range. The context
// is the last n_h historical items before the range (static; it does not
// roll forward over consumed targets), the ground truth is the range's item
// set, and metrics are unweighted means over evaluated users.
inline EvalResult evaluate(const ModelParams& params, const HyperParams& hyper,
                           const Dataset& ds, const SplitPlan& plan,
                           const EvalOptions& opt = {}) {
  if (params.num_users != ds.num_users || params.num_items != ds.num_items) {
    throw ModelError("model shape (" + std::to_string(params.num_users) + " users, " +
                     std::to_string(params.num_items) + " items) does not match dataset (" +
                     std::to_string(ds.num_users) + ", " + std::to_string(ds.num_items) + ")");
  }
  if (plan.users.size() != ds.num_users) throw DataError("split plan does not match dataset");
  if (opt.ks.empty()) throw ConfigError("ks must be non-empty");

  std::size_t kmax = 0;
  for (int k : opt.ks) {
    if (k < 1) throw ConfigError("metric cutoffs must be >= 1");
    kmax = std::max(kmax, static_cast<std::size_t>(k));
  }

  EvalResult res;
  res.per_k.resize(opt.ks.size());
  for (std::size_t i = 0; i < opt.ks.size(); ++i) res.per_k[i].k = opt.ks[i];

  const ItemId pad = params.pad();
  const std::size_t n_h = static_cast<std::size_t>(hyper.n_h);
  std::vector<ItemId> context(n_h);
  std::vector<double> scores(params.num_items + 1);
  double latency_total = 0.0;

  for (std::size_t u = 0; u < ds.num_users; ++u) {
    const auto& seq = ds.sequences[u];
    const UserRanges& r = plan.users[u];
    std::size_t begin = opt.range == EvalRange::Test ? r.valid_end : r.train_end;
    std::size_t end = opt.range == EvalRange::Test ? r.test_end : r.valid_end;
    if (begin >= end) continue;

    for (std::size_t i = 0; i < n_h; ++i) {
      std::size_t offset = n_h - i;
      context[i] = offset > begin ? pad : seq[begin - offset];
    }

    std::unordered_set<ItemId> truth(seq.begin() + static_cast<std::ptrdiff_t>(begin),
                                     seq.begin() + static_cast<std::ptrdiff_t>(end));
    std::unordered_set<ItemId> exclude;
    if (opt.exclude_seen) {
      exclude.insert(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(begin));
    }

    auto t0 = std::chrono::steady_clock::now();
    ForwardState st = forward(params, hyper, context);
    score_all(params, hyper, static_cast<UserId>(u), st, scores);
    std::vector<ItemId> top = top_k(scores, kmax, exclude);
    auto t1 = std::chrono::steady_clock::now();
    if (opt.measure_latency) {
      latency_total += std::chrono::duration<double>(t1 - t0).count();
    }

    for (std::size_t i = 0; i < opt.ks.size(); ++i) {
      std::span<const ItemId> prefix(top.data(), static_cast<std::size_t>(opt.ks[i]));
      res.per_k[i].recall += recall_at_k(prefix, truth);
      res.per_k[i].ndcg += ndcg_at_k(prefix, truth);
    }
    ++res.users_evaluated;
  }

  if (res.users_evaluated == 0) throw DataError("no evaluable users");
  for (auto& pk : res.per_k) {
    pk.recall /= static_cast<double>(res.users_evaluated);
    pk.ndcg /= static_cast<double>(res.users_evaluated);
  }
  if (opt.measure_latency) {
    res.latency_mean_seconds = latency_total / static_cast<double>(res.users_evaluated);
  }
  return res;
}

}  // namespace seqrec
