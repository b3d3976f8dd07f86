#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "seqrec/errors.hpp"

namespace seqrec {

using UserId = std::int32_t;
using ItemId = std::int32_t;

// One raw event from an interaction log, keys still external.
struct InteractionRecord {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

// Layout of a line-oriented interaction log: field separator plus the column
// position of each field.
struct LogFormat {
  char delimiter = ',';
  int user_col = 0;
  int item_col = 1;
  int rating_col = 2;
  int timestamp_col = 3;

  // Parses a column list like "user,item,rating,timestamp" (any permutation).
  static LogFormat with_columns(std::string_view names, char delimiter = ',');
};

inline LogFormat LogFormat::with_columns(std::string_view names, char delimiter) {
  LogFormat fmt;
  fmt.delimiter = delimiter;
  std::array<int, 4> seen = {0, 0, 0, 0};
  int col = 0;
  std::size_t start = 0;
  while (start <= names.size()) {
    std::size_t end = names.find(',', start);
    if (end == std::string_view::npos) end = names.size();
    std::string_view name = names.substr(start, end - start);
    if (name == "user") {
      fmt.user_col = col;
      seen[0]++;
    } else if (name == "item") {
      fmt.item_col = col;
      seen[1]++;
    } else if (name == "rating") {
      fmt.rating_col = col;
      seen[2]++;
    } else if (name == "timestamp" || name == "time") {
      fmt.timestamp_col = col;
      seen[3]++;
    } else {
      throw ConfigError("unknown column name '" + std::string(name) + "'");
    }
    ++col;
    start = end + 1;
    if (end == names.size()) break;
  }
  if (seen != std::array<int, 4>{1, 1, 1, 1}) {
    throw ConfigError("columns must name user, item, rating, timestamp exactly once");
  }
  return fmt;
}

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(std::string(s), &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

inline bool parse_i64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stoll(std::string(s), &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

// Reads one record per non-blank line, in file order. Blank lines are
// skipped; any other malformed line raises ParseError with its line number.
inline std::vector<InteractionRecord> parse_interactions(std::istream& in,
                                                         const LogFormat& fmt = {}) {
  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  int max_col = std::max({fmt.user_col, fmt.item_col, fmt.rating_col, fmt.timestamp_col});
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view sv = line;
    std::size_t start = 0;
    while (true) {
      std::size_t end = sv.find(fmt.delimiter, start);
      if (end == std::string_view::npos) {
        fields.push_back(sv.substr(start));
        break;
      }
      fields.push_back(sv.substr(start, end - start));
      start = end + 1;
    }
    if (static_cast<int>(fields.size()) <= max_col) {
      throw ParseError(lineno, "expected at least " + std::to_string(max_col + 1) +
                                   " fields, got " + std::to_string(fields.size()));
    }

    InteractionRecord rec;
    rec.user = std::string(fields[fmt.user_col]);
    rec.item = std::string(fields[fmt.item_col]);
    if (rec.user.empty()) throw ParseError(lineno, "empty user key");
    if (rec.item.empty()) throw ParseError(lineno, "empty item key");
    if (!detail::parse_double(fields[fmt.rating_col], rec.rating)) {
      throw ParseError(lineno, "bad rating '" + std::string(fields[fmt.rating_col]) + "'");
    }
    if (!detail::parse_i64(fields[fmt.timestamp_col], rec.timestamp)) {
      throw ParseError(lineno, "bad timestamp '" + std::string(fields[fmt.timestamp_col]) + "'");
    }
    if (rec.timestamp < 0) throw ParseError(lineno, "negative timestamp");
    records.push_back(std::move(rec));
  }
  return records;
}

// Filtered, binarized, id-remapped corpus: per-user chronological sequences
// of dense internal item ids.
struct Dataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<std::vector<ItemId>> sequences;  // indexed by internal user id

  // Internal id -> external key. Empty when loaded from the serialized form.
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;
  // External key -> internal id.
  std::unordered_map<std::string, UserId> user_ids;
  std::unordered_map<std::string, ItemId> item_ids;

  std::size_t num_interactions() const {
    std::size_t total = 0;
    for (const auto& s : sequences) total += s.size();
    return total;
  }
};

struct PreprocessOptions {
  std::size_t min_user_interactions = 10;
  std::size_t min_item_interactions = 5;  // counted as distinct user sequences
  double positive_threshold = 4.0;
};

// Binarizes ratings (>= threshold kept as positive events, the rest dropped),
// then filters users by event count and items by the number of distinct
// sequences they appear in, iterated to a fixpoint so both thresholds hold
// simultaneously. Surviving users/items get dense ids; sequences are sorted
// by timestamp with ties broken by input order.
//
// Id assignment is canonical: users by first appearance in input order, items
// by first appearance when walking users in id order chronologically. This
// makes preprocess idempotent on its own serialized output.
inline Dataset preprocess(const std::vector<InteractionRecord>& records,
                          const PreprocessOptions& opt = {}) {
  struct Event {
    std::size_t user;  // index into user key table
    std::size_t item;  // index into item key table
    std::int64_t timestamp;
    std::size_t input_order;
  };

  std::vector<std::string> user_keys, item_keys;
  std::unordered_map<std::string, std::size_t> user_index, item_index;
  std::vector<Event> events;
  events.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.rating < opt.positive_threshold) continue;  // binarized zeros are dropped
    auto [uit, unew] = user_index.try_emplace(r.user, user_keys.size());
    if (unew) user_keys.push_back(r.user);
    auto [iit, inew] = item_index.try_emplace(r.item, item_keys.size());
    if (inew) item_keys.push_back(r.item);
    events.push_back({uit->second, iit->second, r.timestamp, i});
  }

  std::vector<char> user_alive(user_keys.size(), 1);
  std::vector<char> item_alive(item_keys.size(), 1);
  bool changed = true;
  while (changed) {
    changed = false;

    std::vector<std::size_t> user_count(user_keys.size(), 0);
    for (const auto& e : events) {
      if (user_alive[e.user] && item_alive[e.item]) user_count[e.user]++;
    }
    for (std::size_t u = 0; u < user_keys.size(); ++u) {
      if (user_alive[u] && user_count[u] < opt.min_user_interactions) {
        user_alive[u] = 0;
        changed = true;
      }
    }

    // Item support = number of distinct live sequences containing it.
    std::vector<std::unordered_set<std::size_t>> item_users(item_keys.size());
    for (const auto& e : events) {
      if (user_alive[e.user] && item_alive[e.item]) item_users[e.item].insert(e.user);
    }
    for (std::size_t it = 0; it < item_keys.size(); ++it) {
      if (item_alive[it] && item_users[it].size() < opt.min_item_interactions) {
        item_alive[it] = 0;
        changed = true;
      }
    }
  }

  std::vector<Event> kept;
  kept.reserve(events.size());
  for (const auto& e : events) {
    if (user_alive[e.user] && item_alive[e.item]) kept.push_back(e);
  }
  if (kept.empty()) throw DataError("empty dataset: no user survives filtering");

  Dataset ds;

  // Users: dense ids in order of first appearance among surviving events.
  std::vector<UserId> user_remap(user_keys.size(), -1);
  for (const auto& e : kept) {
    if (user_remap[e.user] < 0) {
      user_remap[e.user] = static_cast<UserId>(ds.user_keys.size());
      ds.user_keys.push_back(user_keys[e.user]);
    }
  }
  ds.num_users = ds.user_keys.size();

  std::vector<std::vector<Event>> per_user(ds.num_users);
  for (const auto& e : kept) per_user[user_remap[e.user]].push_back(e);
  for (auto& seq : per_user) {
    std::stable_sort(seq.begin(), seq.end(), [](const Event& a, const Event& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.input_order < b.input_order;
    });
  }

  // Items: dense ids by first appearance in the canonical traversal order
  // (users by id, events chronologically).
  std::vector<ItemId> item_remap(item_keys.size(), -1);
  ds.sequences.resize(ds.num_users);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    ds.sequences[u].reserve(per_user[u].size());
    for (const auto& e : per_user[u]) {
      if (item_remap[e.item] < 0) {
        item_remap[e.item] = static_cast<ItemId>(ds.item_keys.size());
        ds.item_keys.push_back(item_keys[e.item]);
      }
      ds.sequences[u].push_back(item_remap[e.item]);
    }
  }
  ds.num_items = ds.item_keys.size();

  for (std::size_t u = 0; u < ds.user_keys.size(); ++u) {
    ds.user_ids.emplace(ds.user_keys[u], static_cast<UserId>(u));
  }
  for (std::size_t i = 0; i < ds.item_keys.size(); ++i) {
    ds.item_ids.emplace(ds.item_keys[i], static_cast<ItemId>(i));
  }
  return ds;
}

// Serialized dataset format: header "m n", then one line per user of the form
// "<user id> <item id> <item id> ...". Trailing lines starting with '#' are
// metadata (config echo) and are ignored on load.
inline void save_dataset(const Dataset& ds, std::ostream& out,
                         const std::string& metadata = {}) {
  out << ds.num_users << ' ' << ds.num_items << '\n';
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    out << u;
    for (ItemId item : ds.sequences[u]) out << ' ' << item;
    out << '\n';
  }
  if (!metadata.empty()) {
    std::istringstream lines(metadata);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
}

inline Dataset load_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing dataset header");
  {
    std::istringstream hdr(line);
    if (!(hdr >> ds.num_users >> ds.num_items)) {
      throw ParseError(1, "bad dataset header '" + line + "'");
    }
  }
  ds.sequences.resize(ds.num_users);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    if (!std::getline(in, line)) {
      throw ParseError(u + 1, "expected " + std::to_string(ds.num_users) + " user lines");
    }
    std::istringstream ls(line);
    std::size_t uid;
    if (!(ls >> uid) || uid != u) {
      throw ParseError(u + 2, "expected user id " + std::to_string(u));
    }
    long long item;
    while (ls >> item) {
      if (item < 0 || item >= static_cast<long long>(ds.num_items)) {
        throw ParseError(u + 2, "item id " + std::to_string(item) + " out of range");
      }
      ds.sequences[u].push_back(static_cast<ItemId>(item));
    }
    if (ds.sequences[u].empty()) throw ParseError(u + 2, "empty sequence");
  }
  return ds;
}

// Inverse of save_dataset for feeding a dataset back through preprocess:
// internal ids become keys, positions become timestamps, ratings are all
// positive.
inline std::vector<InteractionRecord> dataset_to_records(const Dataset& ds) {
  std::vector<InteractionRecord> records;
  records.reserve(ds.num_interactions());
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    for (std::size_t t = 0; t < ds.sequences[u].size(); ++t) {
      records.push_back({std::to_string(u), std::to_string(ds.sequences[u][t]), 5.0,
                         static_cast<std::int64_t>(t)});
    }
  }
  return records;
}

}  // namespace seqrec
