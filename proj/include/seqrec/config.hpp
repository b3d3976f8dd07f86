#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seqrec/data.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/model.hpp"
#include "seqrec/split.hpp"
#include "seqrec/synth.hpp"

namespace seqrec {

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline long long parse_int(const std::string& key, const std::string& v) {
  std::int64_t out;
  if (!parse_i64(v, out)) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out;
  if (!parse_double(v, out)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline std::vector<std::string> split_ws(const std::string& v) {
  std::istringstream ss(v);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// A full run description: paths, parsing layout, preprocessing thresholds,
// protocol, hyperparameters, optional grid, and the synthetic/bench knobs.
// One `key = value` per line; '#' starts a comment; command-line overrides
// are applied through the same set() path and take precedence.
struct RunConfig {
  // paths
  std::string input;
  std::string dataset;
  std::string checkpoint;
  std::string report;
  std::string metrics;

  // raw log layout
  char delimiter = ',';
  std::string columns = "user,item,rating,timestamp";

  PreprocessOptions preprocess;

  // protocol
  SplitSetting setting = SplitSetting::Cut80_20;
  bool exclude_seen = false;
  bool retrain = false;  // retrain on train+validation before evaluating
  std::vector<int> ks = {5, 10};

  HyperParams hyper;

  // grid-search value lists, keyed by hyperparameter name; values are applied
  // through set(), so any set()-accepted spelling works
  std::map<std::string, std::vector<std::string>> grid;

  // synthetic corpus generation
  std::string synth_mode = "markov";
  std::size_t synth_users = 200;
  std::size_t synth_items = 50;
  std::size_t synth_length = 60;
  double synth_noise = 0.1;
  std::size_t synth_prefs = 8;

  // latency bench
  std::vector<std::size_t> bench_items = {1000, 10000, 100000};
  int bench_d = 64;
  int bench_reps = 15;
  int bench_k = 10;

  void set(const std::string& key, const std::string& value);
  std::string echo() const;

  static RunConfig from_stream(std::istream& in);
  static RunConfig from_file(const std::string& path);
};

inline void RunConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_int;
  using detail::parse_real;

  if (key.starts_with("grid.")) {
    std::string hp = key.substr(5);
    static const char* gridable[] = {"d",      "n_h",          "n_l",       "n_p",
                                     "p",      "lambda",       "learning_rate"};
    bool ok = false;
    for (const char* g : gridable) ok = ok || hp == g;
    if (!ok) throw ConfigError("grid does not support key '" + hp + "'");
    auto values = detail::split_ws(value);
    if (values.empty()) throw ConfigError(key + ": grid list must be non-empty");
    grid[hp] = std::move(values);
    return;
  }

  if (key == "input") input = value;
  else if (key == "dataset") dataset = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "report") report = value;
  else if (key == "metrics") metrics = value;
  else if (key == "delimiter") {
    std::string v = value == "\\t" ? "\t" : value;
    if (v.size() != 1) throw ConfigError("delimiter must be a single character");
    delimiter = v[0];
  } else if (key == "columns") {
    LogFormat::with_columns(value, delimiter);  // validate now
    columns = value;
  } else if (key == "min_user_interactions") {
    preprocess.min_user_interactions = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "min_item_interactions") {
    preprocess.min_item_interactions = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "positive_threshold") {
    preprocess.positive_threshold = parse_real(key, value);
  } else if (key == "setting") {
    setting = parse_split_setting(value);
  } else if (key == "exclude_seen") {
    exclude_seen = parse_bool(key, value);
  } else if (key == "retrain") {
    retrain = parse_bool(key, value);
  } else if (key == "ks") {
    ks.clear();
    for (const auto& tok : detail::split_ws(value)) {
      ks.push_back(static_cast<int>(parse_int(key, tok)));
    }
    if (ks.empty()) throw ConfigError("ks must be non-empty");
  } else if (key == "d") {
    hyper.d = static_cast<int>(parse_int(key, value));
  } else if (key == "n_h") {
    hyper.n_h = static_cast<int>(parse_int(key, value));
  } else if (key == "n_l") {
    hyper.n_l = static_cast<int>(parse_int(key, value));
  } else if (key == "n_p") {
    hyper.n_p = static_cast<int>(parse_int(key, value));
  } else if (key == "p") {
    hyper.synergy_order = static_cast<int>(parse_int(key, value));
  } else if (key == "pooling") {
    hyper.pooling = parse_pooling(value);
  } else if (key == "ablation") {
    hyper.ablation = parse_ablation(value);
  } else if (key == "lambda") {
    hyper.l2 = parse_real(key, value);
  } else if (key == "learning_rate") {
    hyper.learning_rate = parse_real(key, value);
  } else if (key == "batch_size") {
    hyper.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "max_epochs") {
    hyper.max_epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "validate_every") {
    hyper.validate_every = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    hyper.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "synth.mode") {
    if (value != "markov" && value != "preference") {
      throw ConfigError("synth.mode must be markov or preference");
    }
    synth_mode = value;
  } else if (key == "synth.users") {
    synth_users = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "synth.items") {
    synth_items = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "synth.length") {
    synth_length = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "synth.noise") {
    synth_noise = parse_real(key, value);
  } else if (key == "synth.prefs") {
    synth_prefs = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "bench.items") {
    bench_items.clear();
    for (const auto& tok : detail::split_ws(value)) {
      bench_items.push_back(static_cast<std::size_t>(parse_int(key, tok)));
    }
  } else if (key == "bench.d") {
    bench_d = static_cast<int>(parse_int(key, value));
  } else if (key == "bench.reps") {
    bench_reps = static_cast<int>(parse_int(key, value));
  } else if (key == "bench.k") {
    bench_k = static_cast<int>(parse_int(key, value));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline std::string RunConfig::echo() const {
  std::ostringstream out;
  auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << '\n'; };
  kv("input", input);
  kv("dataset", dataset);
  kv("checkpoint", checkpoint);
  kv("report", report);
  kv("metrics", metrics);
  kv("delimiter", delimiter == '\t' ? "\\t" : std::string(1, delimiter));
  kv("columns", columns);
  kv("min_user_interactions", std::to_string(preprocess.min_user_interactions));
  kv("min_item_interactions", std::to_string(preprocess.min_item_interactions));
  kv("positive_threshold", detail::format_real(preprocess.positive_threshold));
  kv("setting", to_string(setting));
  kv("exclude_seen", exclude_seen ? "true" : "false");
  kv("retrain", retrain ? "true" : "false");
  {
    std::string v;
    for (int k : ks) v += (v.empty() ? "" : " ") + std::to_string(k);
    kv("ks", v);
  }
  kv("d", std::to_string(hyper.d));
  kv("n_h", std::to_string(hyper.n_h));
  kv("n_l", std::to_string(hyper.n_l));
  kv("n_p", std::to_string(hyper.n_p));
  kv("p", std::to_string(hyper.synergy_order));
  kv("pooling", to_string(hyper.pooling));
  kv("ablation", to_string(hyper.ablation));
  kv("lambda", detail::format_real(hyper.l2));
  kv("learning_rate", detail::format_real(hyper.learning_rate));
  kv("batch_size", std::to_string(hyper.batch_size));
  kv("max_epochs", std::to_string(hyper.max_epochs));
  kv("validate_every", std::to_string(hyper.validate_every));
  kv("seed", std::to_string(hyper.seed));
  for (const auto& [hp, values] : grid) {
    std::string v;
    for (const auto& s : values) v += (v.empty() ? "" : " ") + s;
    kv(("grid." + hp).c_str(), v);
  }
  kv("synth.mode", synth_mode);
  kv("synth.users", std::to_string(synth_users));
  kv("synth.items", std::to_string(synth_items));
  kv("synth.length", std::to_string(synth_length));
  kv("synth.noise", detail::format_real(synth_noise));
  kv("synth.prefs", std::to_string(synth_prefs));
  {
    std::string v;
    for (std::size_t n : bench_items) v += (v.empty() ? "" : " ") + std::to_string(n);
    kv("bench.items", v);
  }
  kv("bench.d", std::to_string(bench_d));
  kv("bench.reps", std::to_string(bench_reps));
  kv("bench.k", std::to_string(bench_k));
  return out.str();
}

inline RunConfig RunConfig::from_stream(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = detail::trim(trimmed.substr(0, eq));
    std::string value = detail::trim(trimmed.substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return from_stream(in);
}

}  // namespace seqrec
