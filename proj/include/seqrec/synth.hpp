#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqrec/data.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

// First-order chain corpus: each user walks a planted item-to-item transition
// table, with a `noise` chance per step of jumping to a uniformly random item.
// The table is returned so tests can use it as an oracle.
struct MarkovCorpus {
  std::vector<InteractionRecord> records;
  std::vector<ItemId> transition;  // transition[x] = successor of item x
};

struct MarkovOptions {
  std::size_t users = 200;
  std::size_t items = 50;
  std::size_t length = 60;
  double noise = 0.1;
  std::uint64_t seed = 1;
};

inline MarkovCorpus gen_markov(const MarkovOptions& opt) {
  Rng rng(opt.seed);
  MarkovCorpus corpus;
  corpus.transition.resize(opt.items);
  for (std::size_t i = 0; i < opt.items; ++i) {
    corpus.transition[i] = static_cast<ItemId>(i);
  }
  rng.shuffle(corpus.transition);  // random permutation keeps every item reachable

  corpus.records.reserve(opt.users * opt.length);
  for (std::size_t u = 0; u < opt.users; ++u) {
    ItemId cur = static_cast<ItemId>(rng.next_index(opt.items));
    for (std::size_t t = 0; t < opt.length; ++t) {
      corpus.records.push_back({"u" + std::to_string(u), "i" + std::to_string(cur), 5.0,
                                static_cast<std::int64_t>(t)});
      ItemId next = rng.next_double() < opt.noise
                        ? static_cast<ItemId>(rng.next_index(opt.items))
                        : corpus.transition[static_cast<std::size_t>(cur)];
      cur = next;
    }
  }
  return corpus;
}

// Stable-preference corpus: each user draws every interaction i.i.d. from a
// small personal subset of items, so the only learnable signal is per-user.
struct PreferenceOptions {
  std::size_t users = 150;
  std::size_t items = 100;
  std::size_t prefs_per_user = 8;
  std::size_t length = 60;
  std::uint64_t seed = 1;
};

inline std::vector<InteractionRecord> gen_preference(const PreferenceOptions& opt) {
  Rng rng(opt.seed);
  std::vector<InteractionRecord> records;
  records.reserve(opt.users * opt.length);
  std::vector<ItemId> pool(opt.items);
  for (std::size_t i = 0; i < opt.items; ++i) pool[i] = static_cast<ItemId>(i);
  for (std::size_t u = 0; u < opt.users; ++u) {
    // partial Fisher-Yates: first prefs_per_user entries are the user's subset
    for (std::size_t i = 0; i < opt.prefs_per_user; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.next_index(opt.items - i));
      std::swap(pool[i], pool[j]);
    }
    for (std::size_t t = 0; t < opt.length; ++t) {
      ItemId item = pool[static_cast<std::size_t>(rng.next_index(opt.prefs_per_user))];
      records.push_back({"u" + std::to_string(u), "i" + std::to_string(item), 5.0,
                         static_cast<std::int64_t>(t)});
    }
  }
  return records;
}

}  // namespace seqrec
