#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "seqrec/bench.hpp"
#include "seqrec/config.hpp"
#include "seqrec/data.hpp"
#include "seqrec/evaluation.hpp"
#include "seqrec/model.hpp"
#include "seqrec/split.hpp"
#include "seqrec/synth.hpp"
#include "seqrec/training.hpp"

namespace seqrec {

namespace detail {

inline std::ifstream open_input(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path not configured");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + what + " '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path not configured");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(std::string("cannot write ") + what + " '" + path + "'");
  return out;
}

inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string format_latency(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1e", seconds);  // 2 significant digits
  return buf;
}

inline std::string hyper_summary(const HyperParams& h) {
  std::ostringstream out;
  out << "d=" << h.d << " n_h=" << h.n_h << " n_l=" << h.n_l << " n_p=" << h.n_p
      << " p=" << h.synergy_order << " pooling=" << to_string(h.pooling)
      << " ablation=" << to_string(h.ablation);
  return out.str();
}

}  // namespace detail

// preprocess: raw log -> dataset file, with corpus statistics on `out`.
inline void cmd_preprocess(const RunConfig& cfg, std::ostream& out = std::cout) {
  auto in = detail::open_input(cfg.input, "input log");
  LogFormat fmt = LogFormat::with_columns(cfg.columns, cfg.delimiter);
  auto records = parse_interactions(in, fmt);
  Dataset ds = preprocess(records, cfg.preprocess);

  auto file = detail::open_output(cfg.dataset, "dataset");
  save_dataset(ds, file, cfg.echo());
  if (!file) throw IoError("failed writing dataset '" + cfg.dataset + "'");

  std::size_t intrns = ds.num_interactions();
  double per_user = static_cast<double>(intrns) / static_cast<double>(ds.num_users);
  double per_item = static_cast<double>(intrns) / static_cast<double>(ds.num_items);
  std::size_t distinct_pairs = 0;  // repeats are kept in sequences, not in density
  {
    std::unordered_set<ItemId> seen;
    for (const auto& seq : ds.sequences) {
      seen.clear();
      seen.insert(seq.begin(), seq.end());
      distinct_pairs += seen.size();
    }
  }
  double density =
      static_cast<double>(distinct_pairs) /
      (static_cast<double>(ds.num_users) * static_cast<double>(ds.num_items));
  char line[256];
  std::snprintf(line, sizeof(line),
                "#users %zu\n#items %zu\n#intrns %zu\n#intrns/u %.1f\n#u/i %.1f\ndensity %.4f%%\n",
                ds.num_users, ds.num_items, intrns, per_user, per_item, 100.0 * density);
  out << line;
}

struct GridRow {
  std::string combo;  // "d=32 n_h=2", empty for a plain run
  double recall10 = 0.0;
  double ndcg10 = 0.0;
  int best_epoch = 0;
  bool selected = false;
};

struct TrainCommandResult {
  HyperParams chosen;
  TrainReport report;       // report of the selected run
  std::vector<GridRow> grid_rows;
};

// train: dataset file -> best checkpoint + report file. With grid lists in
// the config, iterates the cross-product and keeps the configuration with
// the highest validation Recall@10.
inline TrainCommandResult cmd_train(const RunConfig& cfg, std::ostream& out = std::cout) {
  auto in = detail::open_input(cfg.dataset, "dataset");
  Dataset ds = load_dataset(in);
  SplitPlan plan = split(ds, cfg.setting);

  struct Candidate {
    RunConfig cfg;
    std::string combo;
  };
  std::vector<Candidate> runs;
  if (cfg.grid.empty()) {
    runs.push_back({cfg, ""});
  } else {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes(cfg.grid.begin(),
                                                                       cfg.grid.end());
    std::vector<std::size_t> idx(axes.size(), 0);
    bool more = true;
    while (more) {
      Candidate c{cfg, ""};
      c.cfg.grid.clear();
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const std::string& value = axes[a].second[idx[a]];
        c.cfg.set(axes[a].first, value);
        c.combo += (c.combo.empty() ? "" : " ") + axes[a].first + "=" + value;
      }
      runs.push_back(std::move(c));
      more = false;
      for (std::size_t a = axes.size(); a-- > 0;) {
        if (++idx[a] < axes[a].second.size()) {
          more = true;
          break;
        }
        idx[a] = 0;
      }
    }
  }

  TrainCommandResult result;
  ModelParams best_params;
  double best_recall = -1.0;
  std::size_t best_run = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    runs[r].cfg.hyper.validate();
    TrainOptions topt;
    topt.progress = &std::cerr;
    if (!runs[r].combo.empty()) std::cerr << "grid combo: " << runs[r].combo << "\n";
    TrainResult tr = train(ds, plan, runs[r].cfg.hyper, topt);
    GridRow row;
    row.combo = runs[r].combo;
    row.recall10 = tr.report.best_recall10;
    row.best_epoch = tr.report.best_epoch;
    for (const auto& ck : tr.report.checkpoints) {
      if (ck.epoch == tr.report.best_epoch) row.ndcg10 = ck.ndcg10;
    }
    result.grid_rows.push_back(row);
    if (tr.report.best_recall10 > best_recall) {
      best_recall = tr.report.best_recall10;
      best_params = std::move(tr.params);
      result.report = std::move(tr.report);
      result.chosen = runs[r].cfg.hyper;
      best_run = r;
    }
  }
  result.grid_rows[best_run].selected = true;

  // report file: config echo, then checkpoint rows (plain run) or one row
  // per grid combo with the winner marked
  if (!cfg.report.empty()) {
    auto rep = detail::open_output(cfg.report, "report");
    std::istringstream echo(cfg.echo());
    std::string line;
    while (std::getline(echo, line)) rep << "# " << line << '\n';
    rep << "# hyper " << detail::hyper_summary(result.chosen) << '\n';
    if (cfg.grid.empty()) {
      rep << "# columns: epoch recall@10 ndcg@10 mean_loss secs_per_epoch\n";
      for (const auto& ck : result.report.checkpoints) {
        rep << ck.epoch << ' '
            << (ck.has_metrics ? detail::format_metric(ck.recall10) : std::string("-")) << ' '
            << (ck.has_metrics ? detail::format_metric(ck.ndcg10) : std::string("-")) << ' '
            << detail::format_metric(ck.mean_loss) << ' ';
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", ck.seconds_per_epoch);
        rep << buf << '\n';
      }
      rep << "# best_epoch " << result.report.best_epoch << '\n';
    } else {
      rep << "# columns: combo recall@10 ndcg@10 best_epoch\n";
      for (const auto& row : result.grid_rows) {
        rep << row.combo << " recall10=" << detail::format_metric(row.recall10)
            << " ndcg10=" << detail::format_metric(row.ndcg10)
            << " best_epoch=" << row.best_epoch << (row.selected ? " selected" : "") << '\n';
      }
    }
  }

  Checkpoint ck;
  ck.params = std::move(best_params);
  ck.hyper = result.chosen;
  ck.metadata = cfg.echo() + "chosen " + detail::hyper_summary(result.chosen) + "\n";
  auto ckout = detail::open_output(cfg.checkpoint, "checkpoint");
  save_checkpoint(ck, ckout);

  out << "best validation recall@10 " << detail::format_metric(best_recall) << " (epoch "
      << result.report.best_epoch << ")\n";
  return result;
}

// evaluate: checkpoint + dataset -> metrics file. Optionally retrains from
// scratch on train+validation with the checkpoint's hyperparameters first.
inline EvalResult cmd_evaluate(const RunConfig& cfg, std::ostream& out = std::cout) {
  auto din = detail::open_input(cfg.dataset, "dataset");
  Dataset ds = load_dataset(din);
  auto cin_ = detail::open_input(cfg.checkpoint, "checkpoint");
  Checkpoint ck = load_checkpoint(cin_);

  if (ck.params.num_users != ds.num_users) {
    throw ModelError("checkpoint has " + std::to_string(ck.params.num_users) +
                     " users, dataset has " + std::to_string(ds.num_users));
  }
  if (ck.params.num_items != ds.num_items) {
    throw ModelError("checkpoint has " + std::to_string(ck.params.num_items) +
                     " items, dataset has " + std::to_string(ds.num_items));
  }
  if (ck.params.dim != static_cast<std::size_t>(ck.hyper.d)) {
    throw ModelError("checkpoint dimension " + std::to_string(ck.params.dim) +
                     " does not match its hyperparameters d=" + std::to_string(ck.hyper.d));
  }

  SplitPlan plan = split(ds, cfg.setting);
  ModelParams params = std::move(ck.params);
  if (cfg.retrain) {
    TrainOptions topt;
    topt.include_validation = true;
    topt.progress = &std::cerr;
    TrainResult tr = train(ds, plan, ck.hyper, topt);
    params = std::move(tr.params);
  }

  EvalOptions eopt;
  eopt.ks = cfg.ks;
  eopt.exclude_seen = cfg.exclude_seen;
  eopt.measure_latency = false;
  EvalResult res = evaluate(params, ck.hyper, ds, plan, eopt);

  if (!cfg.metrics.empty()) {
    auto mout = detail::open_output(cfg.metrics, "metrics");
    std::istringstream echo(cfg.echo());
    std::string line;
    while (std::getline(echo, line)) mout << "# " << line << '\n';
    mout << "# hyper " << detail::hyper_summary(ck.hyper) << '\n';
    mout << "# users_evaluated " << res.users_evaluated << '\n';
    for (const auto& pk : res.per_k) {
      mout << "recall," << pk.k << ',' << detail::format_metric(pk.recall) << '\n';
      mout << "ndcg," << pk.k << ',' << detail::format_metric(pk.ndcg) << '\n';
    }
  }

  out << "setting " << to_string(cfg.setting) << ", " << res.users_evaluated
      << " users evaluated, exclude_seen " << (cfg.exclude_seen ? "on" : "off") << "\n";
  out << "  k    recall      ndcg\n";
  for (const auto& pk : res.per_k) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%3d  %.6f  %.6f\n", pk.k, pk.recall, pk.ndcg);
    out << buf;
  }
  return res;
}

// bench: per-user ranking latency. With a checkpoint + dataset configured,
// measures the mean over test users; otherwise times synthetic models at the
// catalogue sizes in bench.items.
inline void cmd_bench(const RunConfig& cfg, std::ostream& out = std::cout) {
  if (!cfg.checkpoint.empty()) {
    auto din = detail::open_input(cfg.dataset, "dataset");
    Dataset ds = load_dataset(din);
    auto cin_ = detail::open_input(cfg.checkpoint, "checkpoint");
    Checkpoint ck = load_checkpoint(cin_);
    SplitPlan plan = split(ds, cfg.setting);
    EvalOptions eopt;
    eopt.ks = cfg.ks;
    eopt.exclude_seen = cfg.exclude_seen;
    eopt.measure_latency = true;
    EvalResult res = evaluate(ck.params, ck.hyper, ds, plan, eopt);
    out << "per-user test latency " << detail::format_latency(res.latency_mean_seconds)
        << " s over " << res.users_evaluated << " users\n";
    return;
  }

  HyperParams hyper = cfg.hyper;
  hyper.d = cfg.bench_d;
  hyper.validate();
  Rng rng(hyper.seed);
  for (std::size_t n : cfg.bench_items) {
    ModelParams params = init_params(1, n, static_cast<std::size_t>(hyper.d), rng);
    std::vector<ItemId> context(static_cast<std::size_t>(hyper.n_h));
    for (auto& c : context) c = static_cast<ItemId>(rng.next_index(n));
    double sec = inference_latency(params, hyper, 0, context, cfg.bench_k, cfg.bench_reps);
    out << "items " << n << ": " << detail::format_latency(sec) << " s/user\n";
  }
}

// gen-synth: writes a raw interaction log in the canonical
// user,item,rating,timestamp layout.
inline void cmd_gensynth(const RunConfig& cfg, std::ostream& out = std::cout) {
  std::vector<InteractionRecord> records;
  if (cfg.synth_mode == "markov") {
    MarkovOptions mo;
    mo.users = cfg.synth_users;
    mo.items = cfg.synth_items;
    mo.length = cfg.synth_length;
    mo.noise = cfg.synth_noise;
    mo.seed = cfg.hyper.seed;
    records = gen_markov(mo).records;
  } else {
    PreferenceOptions po;
    po.users = cfg.synth_users;
    po.items = cfg.synth_items;
    po.prefs_per_user = cfg.synth_prefs;
    po.length = cfg.synth_length;
    po.seed = cfg.hyper.seed;
    records = gen_preference(po);
  }
  auto file = detail::open_output(cfg.input, "output log");
  char line[128];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%s,%s,%g,%lld\n", r.user.c_str(), r.item.c_str(),
                  r.rating, static_cast<long long>(r.timestamp));
    file << line;
  }
  out << "wrote " << records.size() << " interactions (" << cfg.synth_mode << ") to "
      << cfg.input << "\n";
}

}  // namespace seqrec
