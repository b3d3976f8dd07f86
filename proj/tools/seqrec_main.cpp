#include <exception>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "seqrec/cli.hpp"
#include "seqrec/config.hpp"
#include "seqrec/errors.hpp"

namespace {

int exit_code_for(const std::string& category) {
  if (category == "config") return 2;
  if (category == "io") return 3;
  if (category == "parse") return 4;
  if (category == "data") return 5;
  if (category == "model") return 6;
  if (category == "training") return 7;
  return 10;
}

struct CommonFlags {
  std::string config_path;
  std::string setting;
  std::string seed;
  bool exclude_seen = false;
  bool bench = false;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration file");
  cmd->add_option("--setting", flags.setting, "split protocol: 80-20-cut, 80-3-cut or 3-los");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_flag("--exclude-seen", flags.exclude_seen,
                "mask the user's history from the candidate pool");
  cmd->add_option("--set", flags.overrides, "override any config key, as key=value")
      ->take_all();
}

seqrec::RunConfig build_config(const CommonFlags& flags) {
  seqrec::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = seqrec::RunConfig::from_file(flags.config_path);
  if (!flags.setting.empty()) cfg.set("setting", flags.setting);
  if (!flags.seed.empty()) cfg.set("seed", flags.seed);
  if (flags.exclude_seen) cfg.set("exclude_seen", "true");
  for (const auto& kv : flags.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw seqrec::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequential recommender: preprocessing, training, evaluation"};
  app.require_subcommand(1);

  CommonFlags pre_f, train_f, eval_f, bench_f, synth_f;
  auto* pre = app.add_subcommand("preprocess", "filter and binarize a raw interaction log");
  add_common(pre, pre_f);
  auto* tr = app.add_subcommand("train", "train on a preprocessed dataset");
  add_common(tr, train_f);
  auto* ev = app.add_subcommand("evaluate", "rank and score a checkpoint on the test split");
  add_common(ev, eval_f);
  ev->add_flag("--bench", eval_f.bench, "also measure per-user latency");
  auto* be = app.add_subcommand("bench", "per-user inference latency");
  add_common(be, bench_f);
  auto* sy = app.add_subcommand("gen-synth", "generate a synthetic interaction log");
  add_common(sy, synth_f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) {
      seqrec::cmd_preprocess(build_config(pre_f));
    } else if (tr->parsed()) {
      seqrec::cmd_train(build_config(train_f));
    } else if (ev->parsed()) {
      seqrec::RunConfig cfg = build_config(eval_f);
      seqrec::cmd_evaluate(cfg);
      if (eval_f.bench) {
        seqrec::cmd_bench(cfg);
      }
    } else if (be->parsed()) {
      seqrec::cmd_bench(build_config(bench_f));
    } else if (sy->parsed()) {
      seqrec::cmd_gensynth(build_config(synth_f));
    }
  } catch (const seqrec::Error& e) {
    std::cerr << "error: category=" << e.category() << ": " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: category=internal: " << e.what() << "\n";
    return 10;
  }
  return 0;
}
