#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "seqrec/data.hpp"
#include "seqrec/errors.hpp"

namespace seqrec {

// The three chronological evaluation protocols.
enum class SplitSetting {
  Cut80_20,  // train = first 70%, validation = next 10%, test = rest
  Cut80_3,   // same train/validation, test = the 3 items after validation
  Los3,      // test = last 3 items, validation = the 3 before, train = rest
};

inline std::string to_string(SplitSetting s) {
  switch (s) {
    case SplitSetting::Cut80_20: return "80-20-cut";
    case SplitSetting::Cut80_3: return "80-3-cut";
    case SplitSetting::Los3: return "3-los";
  }
  return "?";
}

inline SplitSetting parse_split_setting(std::string_view s) {
  if (s == "80-20-cut") return SplitSetting::Cut80_20;
  if (s == "80-3-cut") return SplitSetting::Cut80_3;
  if (s == "3-los") return SplitSetting::Los3;
  throw ConfigError("unknown setting '" + std::string(s) +
                    "' (expected 80-20-cut, 80-3-cut or 3-los)");
}

// Per-user half-open index boundaries into the sequence:
// train = [0, train_end), validation = [train_end, valid_end),
// test = [valid_end, test_end).
struct UserRanges {
  std::size_t train_end = 0;
  std::size_t valid_end = 0;
  std::size_t test_end = 0;
};

struct SplitPlan {
  SplitSetting setting = SplitSetting::Cut80_20;
  std::vector<UserRanges> users;
};

inline SplitPlan split(const Dataset& ds, SplitSetting setting) {
  SplitPlan plan;
  plan.setting = setting;
  plan.users.resize(ds.num_users);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    std::size_t len = ds.sequences[u].size();
    if (len < 10) {
      throw DataError("user " + std::to_string(u) + " has sequence length " +
                      std::to_string(len) + " < 10");
    }
    UserRanges& r = plan.users[u];
    switch (setting) {
      case SplitSetting::Cut80_20:
        r.train_end = len * 7 / 10;
        r.valid_end = len * 8 / 10;
        r.test_end = len;
        break;
      case SplitSetting::Cut80_3:
        r.train_end = len * 7 / 10;
        r.valid_end = len * 8 / 10;
        r.test_end = std::min(len, r.valid_end + 3);
        break;
      case SplitSetting::Los3:
        r.test_end = len;
        r.valid_end = len - 3;
        r.train_end = len - 6;
        break;
    }
  }
  return plan;
}

}  // namespace seqrec
