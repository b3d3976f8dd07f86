#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqrec/data.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/split.hpp"

namespace seqrec {

// The reserved pad id is one past the real item ids; embedding row layouts
// reserve a zero row for it (see ModelParams).
inline ItemId pad_id(std::size_t num_items) { return static_cast<ItemId>(num_items); }

// One sliding-window sample: n_h context items (left-padded when the window
// starts before the sequence) and the n_p items that follow them.
struct TrainingInstance {
  UserId user = 0;
  std::vector<ItemId> context;  // size n_h, first pad_count entries are pad
  std::vector<ItemId> targets;  // size n_p, never padded
  int pad_count = 0;

  std::span<const ItemId> non_pad_context() const {
    return {context.data() + pad_count, context.size() - static_cast<std::size_t>(pad_count)};
  }
};

// Slides a window of size n_h + n_p one position at a time over each user's
// training range ([0, train_end), or [0, valid_end) with include_validation).
// Contexts reaching before the sequence start are left-padded; windows whose
// context would be entirely pad are not generated, so every instance has at
// least one real context item. Output is ordered by user id, then window
// position.
inline std::vector<TrainingInstance> make_instances(const Dataset& ds,
                                                    const SplitPlan& plan,
                                                    std::size_t n_h, std::size_t n_p,
                                                    bool include_validation = false) {
  if (n_h < 1 || n_p < 1) throw ConfigError("n_h and n_p must be >= 1");
  if (plan.users.size() != ds.num_users) {
    throw DataError("split plan covers " + std::to_string(plan.users.size()) +
                    " users, dataset has " + std::to_string(ds.num_users));
  }
  const ItemId pad = pad_id(ds.num_items);
  std::vector<TrainingInstance> out;
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    const auto& seq = ds.sequences[u];
    std::size_t range_end =
        include_validation ? plan.users[u].valid_end : plan.users[u].train_end;
    if (range_end < n_p + 1) continue;  // no window with a non-pad context fits
    for (std::size_t t = 1; t + n_p <= range_end; ++t) {
      TrainingInstance inst;
      inst.user = static_cast<UserId>(u);
      inst.context.resize(n_h);
      inst.pad_count = t < n_h ? static_cast<int>(n_h - t) : 0;
      for (std::size_t i = 0; i < n_h; ++i) {
        inst.context[i] = i < static_cast<std::size_t>(inst.pad_count)
                              ? pad
                              : seq[t - n_h + i];
      }
      inst.targets.assign(seq.begin() + static_cast<std::ptrdiff_t>(t),
                          seq.begin() + static_cast<std::ptrdiff_t>(t + n_p));
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace seqrec
