// Acceptance suite: every check prints one [PASS]/[FAIL] line; the process
// exits nonzero if any check fails. argv[1] is the path of the CLI binary
// (used by the end-to-end determinism check).

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "seqrec/bench.hpp"
#include "seqrec/cli.hpp"
#include "seqrec/evaluation.hpp"
#include "seqrec/split.hpp"
#include "seqrec/synth.hpp"
#include "seqrec/training.hpp"

using namespace seqrec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, const char* spec = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// ---------------------------------------------------------------- 1
Outcome gradient_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260808);
  const int configs = 220;
  double worst = 0.0;
  std::size_t coords = 0;
  for (int i = 0; i < configs; ++i) {
    gradcheck::Case c = gradcheck::random_case(rng);
    auto res = gradcheck::check(c, 1e-5);
    worst = std::max(worst, res.max_rel_error);
    coords += res.coords_checked;
  }
  double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = worst <= 1e-4 && elapsed <= 60.0;
  out.detail = std::to_string(configs) + " configs, " + std::to_string(coords) +
               " coords, max rel err " + fmt(worst) + ", " + fmt(elapsed) + "s";
  return out;
}

// ---------------------------------------------------------------- 2
Outcome synergy_oracle() {
  Rng rng(7);
  double worst = 0.0;
  int cases = 0;
  for (std::size_t size = 2; size <= 4; ++size) {
    for (std::size_t d = 1; d <= 3; ++d) {
      for (int order = 2; order <= 4; ++order) {
        for (int draw = 0; draw < 25; ++draw) {
          ModelParams p;
          p.num_users = 1;
          p.num_items = 5;
          p.dim = d;
          p.user_emb = Matrix(1, d);
          p.src_emb = Matrix(6, d);
          p.cand_emb = Matrix(6, d);
          for (std::size_t r = 0; r < 5; ++r) {
            for (std::size_t i = 0; i < d; ++i) p.src_emb.at(r, i) = rng.next_double(-1, 1);
          }
          std::vector<ItemId> items;
          for (std::size_t j = 0; j < size; ++j) {
            items.push_back(static_cast<ItemId>(rng.next_index(5)));
          }
          SynergyResult got = synergy_orders(items, p, order);
          for (int k = 2; k <= order; ++k) {
            Vec want = oracles::synergy_expanded(items, p.src_emb, k);
            const Vec& have = got.aggregated[static_cast<std::size_t>(k - 2)];
            for (std::size_t i = 0; i < d; ++i) {
              worst = std::max(worst, std::abs(have[i] - want[i]));
            }
          }
          ++cases;
        }
      }
    }
  }
  Outcome out;
  out.pass = worst <= 1e-12;
  out.detail = std::to_string(cases) + " windows, max abs dev " + fmt(worst);
  return out;
}

// ---------------------------------------------------------------- 3
Outcome degeneracy_identity() {
  Rng rng(99);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t m = 1 + rng.next_index(6);
    std::size_t n = 3 + rng.next_index(8);
    std::size_t d = 1 + rng.next_index(5);
    HyperParams hyper;
    hyper.d = static_cast<int>(d);
    hyper.n_h = 1 + static_cast<int>(rng.next_index(4));
    hyper.n_l = 1 + static_cast<int>(rng.next_index(static_cast<std::uint64_t>(hyper.n_h)));
    hyper.synergy_order = 1;  // the synergy model must collapse to the plain one
    hyper.pooling = rng.next_index(2) == 0 ? Pooling::Mean : Pooling::Max;
    std::uint64_t ab = rng.next_index(3);
    hyper.ablation = ab == 0 ? Ablation::None
                             : (ab == 1 ? Ablation::DropLowOrder : Ablation::DropUser);
    ModelParams params = init_params(m, n, d, rng);
    UserId user = static_cast<UserId>(rng.next_index(m));
    int pad_count = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(hyper.n_h)));
    std::vector<ItemId> ctx(static_cast<std::size_t>(hyper.n_h), params.pad());
    for (std::size_t i = static_cast<std::size_t>(pad_count); i < ctx.size(); ++i) {
      ctx[i] = static_cast<ItemId>(rng.next_index(n));
    }

    // full path (latent cross with an empty synergy list)
    auto synergy_scores = score_all(params, hyper, user, ctx);

    // independent plain scorer: pooled embeddings and three dot products
    Vec h = pool(ctx, params, hyper.pooling, ctx.size());
    Vec o = pool(ctx, params, hyper.pooling, static_cast<std::size_t>(hyper.n_l));
    std::vector<double> plain(params.num_items + 1);
    for (std::size_t j = 0; j < plain.size(); ++j) {
      auto w = params.cand_emb.row(j);
      double r = 0.0;
      if (hyper.ablation != Ablation::DropUser) {
        double acc = 0.0;
        auto u = params.user_emb.row(static_cast<std::size_t>(user));
        for (std::size_t i = 0; i < d; ++i) acc += u[i] * w[i];
        r += acc;
      }
      {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += h[i] * w[i];
        r += acc;
      }
      if (hyper.ablation != Ablation::DropLowOrder) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += o[i] * w[i];
        r += acc;
      }
      plain[j] = r;
    }
    if (std::memcmp(synergy_scores.data(), plain.data(),
                    plain.size() * sizeof(double)) != 0) {
      ++mismatches;
    }
  }
  Outcome out;
  out.pass = mismatches == 0;
  out.detail = "100 inputs, " + std::to_string(mismatches) + " bitwise mismatches";
  return out;
}

// ---------------------------------------------------------------- 4
Outcome metric_oracles() {
  long long cases = 0, failures = 0;
  for (int n = 1; n <= 6; ++n) {
    std::vector<ItemId> pool_ids;
    for (int i = 0; i < n; ++i) pool_ids.push_back(static_cast<ItemId>(i));
    for (int k = 1; k <= std::min(4, n); ++k) {
      // all ordered k-arrangements of [0, n)
      std::vector<std::vector<ItemId>> lists;
      std::vector<ItemId> cur;
      std::vector<bool> used(static_cast<std::size_t>(n), false);
      std::function<void()> build = [&] {
        if (static_cast<int>(cur.size()) == k) {
          lists.push_back(cur);
          return;
        }
        for (int i = 0; i < n; ++i) {
          if (used[static_cast<std::size_t>(i)]) continue;
          used[static_cast<std::size_t>(i)] = true;
          cur.push_back(static_cast<ItemId>(i));
          build();
          cur.pop_back();
          used[static_cast<std::size_t>(i)] = false;
        }
      };
      build();
      for (const auto& rec : lists) {
        for (unsigned mask = 1; mask < (1u << n); ++mask) {
          std::unordered_set<ItemId> truth;
          for (int bit = 0; bit < n; ++bit) {
            if (mask & (1u << bit)) truth.insert(static_cast<ItemId>(bit));
          }
          ++cases;
          if (recall_at_k(rec, truth) != oracles::recall_naive(rec, truth)) ++failures;
          if (ndcg_at_k(rec, truth) != oracles::ndcg_naive(rec, truth)) ++failures;
        }
      }
    }
  }
  std::unordered_set<ItemId> one = {5};
  std::vector<ItemId> second = {1, 5};
  bool hand = std::abs(ndcg_at_k(second, one) - 0.63093) < 1e-5;
  Outcome out;
  out.pass = failures == 0 && hand;
  out.detail = std::to_string(cases) + " exhaustive cases, " + std::to_string(failures) +
               " mismatches, 1/log2(3) " + (hand ? "ok" : "wrong");
  return out;
}

// ---------------------------------------------------------------- 5
Outcome split_invariants() {
  Rng rng(505);
  int violations = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::size_t len = 10 + rng.next_index(491);
    Dataset ds;
    ds.num_users = 1;
    ds.num_items = 1;
    ds.sequences = {std::vector<ItemId>(len, 0)};
    SplitPlan cut = split(ds, SplitSetting::Cut80_20);
    SplitPlan cut3 = split(ds, SplitSetting::Cut80_3);
    SplitPlan los = split(ds, SplitSetting::Los3);
    auto ok = [&](const UserRanges& r) {
      return r.train_end >= 1 && r.train_end <= r.valid_end && r.valid_end <= r.test_end &&
             r.test_end <= len;
    };
    if (!ok(cut.users[0]) || !ok(cut3.users[0]) || !ok(los.users[0])) ++violations;
    if (cut.users[0].train_end != len * 7 / 10) ++violations;
    if (cut.users[0].valid_end != len * 8 / 10) ++violations;
    if (cut.users[0].test_end != len) ++violations;
    if (cut.users[0].train_end != cut3.users[0].train_end ||
        cut.users[0].valid_end != cut3.users[0].valid_end) {
      ++violations;  // the two cut settings must share train/validation
    }
    if (cut3.users[0].test_end != std::min(len, cut3.users[0].valid_end + 3)) ++violations;
    if (los.users[0].test_end != len || los.users[0].valid_end != len - 3 ||
        los.users[0].train_end != len - 6) {
      ++violations;
    }
  }
  Outcome out;
  out.pass = violations == 0;
  out.detail = std::to_string(trials) + " lengths, " + std::to_string(violations) +
               " violations";
  return out;
}

// ------------------------------------------------------- shared by 6 and 7
using ScoreFn = std::function<void(UserId, std::span<const ItemId>, std::span<double>)>;

// Hit rate of the top-k list against each held-out test position taken
// independently: context = the n_h items immediately before the position.
double next_item_hit_rate(const Dataset& ds, const SplitPlan& plan, std::size_t n_h,
                          std::size_t num_items, int k, const ScoreFn& scorer) {
  std::vector<ItemId> ctx(n_h);
  std::vector<double> scores(num_items + 1);
  std::size_t hits = 0, total = 0;
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    const auto& seq = ds.sequences[u];
    for (std::size_t t = plan.users[u].valid_end; t < plan.users[u].test_end; ++t) {
      for (std::size_t i = 0; i < n_h; ++i) {
        std::size_t offset = n_h - i;
        ctx[i] = offset > t ? static_cast<ItemId>(num_items) : seq[t - offset];
      }
      scorer(static_cast<UserId>(u), ctx, scores);
      auto top = top_k(scores, static_cast<std::size_t>(k));
      for (ItemId id : top) hits += id == seq[t] ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// ---------------------------------------------------------------- 6
Outcome synthetic_learnability() {
  auto t0 = std::chrono::steady_clock::now();
  MarkovOptions mo;
  mo.users = 200;
  mo.items = 50;
  mo.length = 60;
  mo.noise = 0.1;
  mo.seed = 4242;
  MarkovCorpus corpus = gen_markov(mo);
  Dataset ds = preprocess(corpus.records);
  SplitPlan plan = split(ds, SplitSetting::Cut80_3);

  HyperParams hyper;
  hyper.d = 32;
  hyper.n_h = 4;
  hyper.n_l = 1;
  hyper.n_p = 1;
  hyper.synergy_order = 1;
  hyper.pooling = Pooling::Mean;
  hyper.max_epochs = 200;
  hyper.validate_every = 20;
  hyper.seed = 11;
  TrainResult tr = train(ds, plan, hyper);

  ScoreFn model_scorer = [&](UserId u, std::span<const ItemId> ctx, std::span<double> out) {
    ForwardState st = forward(tr.params, hyper, ctx);
    score_all(tr.params, hyper, u, st, out);
  };
  double recall1 = next_item_hit_rate(ds, plan, 4, ds.num_items, 1, model_scorer);

  Rng noise_rng(1);
  ScoreFn random_scorer = [&](UserId, std::span<const ItemId>, std::span<double> out) {
    for (auto& s : out) s = noise_rng.next_double();
  };
  double recall1_random = next_item_hit_rate(ds, plan, 4, ds.num_items, 1, random_scorer);

  double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = recall1 >= 0.80 && recall1_random <= 0.05 && elapsed <= 300.0;
  out.detail = "recall@1 " + fmt(recall1) + " (needs >= 0.80), random ranker " +
               fmt(recall1_random) + " (needs <= 0.05), " + fmt(elapsed) + "s of 300s";
  return out;
}

// ---------------------------------------------------------------- 7
Outcome ablation_direction() {
  // purely low-order signal: a first-order chain read through a context
  // window wider than the cutoff, so the order-blind pooled bag spreads its
  // votes across more candidates than fit in the top 10; dropping the
  // low-order term must cost recall
  MarkovOptions mo;
  mo.users = 150;
  mo.items = 100;
  mo.length = 50;
  mo.noise = 0.1;
  mo.seed = 777;
  Dataset chain = preprocess(gen_markov(mo).records);
  SplitPlan chain_plan = split(chain, SplitSetting::Cut80_3);

  HyperParams hyper;
  hyper.d = 16;
  hyper.n_h = 16;
  hyper.n_l = 1;
  hyper.n_p = 1;
  hyper.synergy_order = 2;
  hyper.pooling = Pooling::Mean;
  hyper.max_epochs = 60;
  hyper.validate_every = 20;
  hyper.seed = 13;

  EvalOptions eopt;
  eopt.ks = {10};

  auto recall10 = [&](const Dataset& ds, const SplitPlan& plan, HyperParams h) {
    TrainResult tr = train(ds, plan, h);
    return evaluate(tr.params, h, ds, plan, eopt).per_k[0].recall;
  };

  double chain_full = recall10(chain, chain_plan, hyper);
  HyperParams no_low = hyper;
  no_low.ablation = Ablation::DropLowOrder;
  double chain_dropped = recall10(chain, chain_plan, no_low);

  // stable per-user preferences: dropping the user term must cost recall
  PreferenceOptions po;
  po.users = 150;
  po.items = 100;
  po.prefs_per_user = 8;
  po.length = 50;
  po.seed = 778;
  Dataset prefs = preprocess(gen_preference(po));
  SplitPlan prefs_plan = split(prefs, SplitSetting::Cut80_3);

  HyperParams pref_hyper = hyper;
  pref_hyper.n_h = 4;
  pref_hyper.n_l = 1;
  double pref_full = recall10(prefs, prefs_plan, pref_hyper);
  HyperParams no_user = pref_hyper;
  no_user.ablation = Ablation::DropUser;
  double pref_dropped = recall10(prefs, prefs_plan, no_user);

  Outcome out;
  out.pass = chain_dropped < chain_full && pref_dropped < pref_full;
  out.detail = "chain recall@10 none " + fmt(chain_full) + " vs drop-o " + fmt(chain_dropped) +
               "; preference none " + fmt(pref_full) + " vs drop-u " + fmt(pref_dropped);
  return out;
}

// ---------------------------------------------------------------- 8
Outcome determinism(const std::string& cli) {
  Outcome out;
  if (cli.empty()) {
    out.detail = "CLI path not provided (argv[1])";
    return out;
  }
  fs::path base = fs::temp_directory_path() /
                  ("seqrec_accept_" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);

  // one fixed config; the whole pipeline runs twice with identical inputs
  std::string common = std::string(" --set input=") + (base / "raw.csv").string() +
                       " --set dataset=" + (base / "data.txt").string() +
                       " --set checkpoint=" + (base / "model.bin").string() +
                       " --set report=" + (base / "report.txt").string() +
                       " --set metrics=" + (base / "metrics.txt").string() +
                       " --set synth.users=30 --set synth.items=12 --set synth.length=20" +
                       " --set min_user_interactions=5 --set min_item_interactions=1" +
                       " --set d=8 --set n_h=2 --set n_l=1 --set n_p=1 --set p=2" +
                       " --set max_epochs=4 --set validate_every=2 --seed 77" +
                       " > /dev/null 2>&1";
  auto run_pipeline = [&]() -> bool {
    for (const char* sub : {"gen-synth", "preprocess", "train", "evaluate"}) {
      std::string cmd = cli + " " + sub + common;
      if (std::system(cmd.c_str()) != 0) return false;
    }
    return true;
  };
  auto snapshot = [&](const char* name, const char* to) {
    fs::copy_file(base / name, base / to, fs::copy_options::overwrite_existing);
  };

  if (!run_pipeline()) {
    out.detail = "pipeline run failed";
    fs::remove_all(base);
    return out;
  }
  snapshot("data.txt", "data.first");
  snapshot("model.bin", "model.first");
  snapshot("metrics.txt", "metrics.first");
  if (!run_pipeline()) {
    out.detail = "second pipeline run failed";
    fs::remove_all(base);
    return out;
  }

  auto same = [&](const char* name, const char* snap) {
    std::ifstream a(base / name, std::ios::binary);
    std::ifstream b(base / snap, std::ios::binary);
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    return a && b && sa.str() == sb.str() && !sa.str().empty();
  };
  bool data = same("data.txt", "data.first");
  bool model = same("model.bin", "model.first");
  bool metrics = same("metrics.txt", "metrics.first");
  fs::remove_all(base);
  out.pass = data && model && metrics;
  out.detail = std::string("dataset ") + (data ? "identical" : "DIFFERS") + ", checkpoint " +
               (model ? "identical" : "DIFFERS") + ", metrics " +
               (metrics ? "identical" : "DIFFERS");
  return out;
}

// ---------------------------------------------------------------- 9
Outcome latency_linearity() {
  // d is fixed but small, so the per-candidate dot products (latency-bound
  // fused chains) dominate even when the largest table streams from L3; a
  // bandwidth-bound footprint would expose this shared box's co-tenant
  // contention rather than the ranking cost model
  HyperParams hyper;
  hyper.d = 16;
  hyper.n_h = 4;
  hyper.n_l = 2;
  hyper.synergy_order = 1;
  Rng rng(3141);
  std::vector<std::size_t> sizes = {1000, 10000, 100000};
  std::vector<int> reps = {100, 24, 8};
  std::vector<ModelParams> params;
  std::vector<std::vector<ItemId>> contexts;
  for (std::size_t n : sizes) {
    params.push_back(init_params(1, n, static_cast<std::size_t>(hyper.d), rng));
    std::vector<ItemId> ctx(4);
    for (auto& c : ctx) c = static_cast<ItemId>(rng.next_index(n));
    contexts.push_back(ctx);
  }
  // interleaved rounds spread over several seconds, best-of: co-tenant cache
  // and bandwidth contention only ever adds time, so the minimum is the
  // cleanest estimate of the machine's true per-ranking cost
  std::vector<double> times(sizes.size(), 1e9);
  for (int round = 0; round < 10; ++round) {
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      double t = inference_latency(params[i], hyper, 0, contexts[i], 10, reps[i]);
      times[i] = std::min(times[i], t);
    }
  }
  double r1 = times[1] / times[0];
  double r2 = times[2] / times[1];
  Outcome out;
  out.pass = r1 >= 7.0 && r1 <= 13.0 && r2 >= 7.0 && r2 <= 13.0;
  out.detail = "latency " + fmt(times[0], "%.2e") + " / " + fmt(times[1], "%.2e") + " / " +
               fmt(times[2], "%.2e") + " s; decade ratios " + fmt(r1, "%.2f") + ", " +
               fmt(r2, "%.2f") + " (each within [7, 13])";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  struct Entry {
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Entry> checks = {
      {"1. gradient oracle vs central finite differences", gradient_oracle},
      {"2. synergy recursion vs literal nested-loop expansion", synergy_oracle},
      {"3. p=1 degeneracy, synergy path equals plain path bitwise", degeneracy_identity},
      {"4. recall/ndcg vs naive references, exhaustive small cases", metric_oracles},
      {"5. split protocol invariants on 1000 random lengths", split_invariants},
      {"6. synthetic learnability on a planted first-order chain", synthetic_learnability},
      {"7. ablation direction on planted low-order/user-preference signals",
       ablation_direction},
      {"8. end-to-end determinism of the CLI pipeline", [&] { return determinism(cli); }},
      {"9. per-user inference latency scales linearly in the item count",
       latency_linearity},
  };

  int failures = 0;
  for (auto& entry : checks) {
    Outcome out;
    try {
      out = entry.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << entry.name << ": " << out.detail
              << "\n";
    std::cout.flush();
    failures += out.pass ? 0 : 1;
  }
  if (failures > 0) {
    std::cout << failures << " of " << checks.size() << " acceptance checks failed\n";
    return 1;
  }
  std::cout << "all " << checks.size() << " acceptance checks passed\n";
  return 0;
}
