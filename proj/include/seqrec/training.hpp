#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "seqrec/evaluation.hpp"
#include "seqrec/instances.hpp"
#include "seqrec/model.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

// Uniform over the real items not in the target window. The pad id lies past
// [0, num_items) and is excluded by construction.
inline ItemId sample_negative(std::span<const ItemId> targets, std::size_t num_items,
                              Rng& rng) {
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    bool repeat = false;
    for (std::size_t j = 0; j < i; ++j) repeat = repeat || targets[j] == targets[i];
    if (!repeat) ++distinct;
  }
  if (distinct >= num_items) {
    throw TrainingError("sample_negative: targets cover every item");
  }
  while (true) {
    ItemId x = static_cast<ItemId>(rng.next_index(num_items));
    bool in_targets = false;
    for (ItemId t : targets) in_targets = in_targets || t == x;
    if (!in_targets) return x;
  }
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Pairwise ranking loss -log sigmoid(r_pos - r_neg) in softplus form, finite
// for any margin. The L2 penalty is applied separately per batch.
inline double bpr_loss(double r_pos, double r_neg) { return softplus(r_neg - r_pos); }

// Sparse per-row gradients for one embedding table.
using GradMap = std::unordered_map<int, Vec>;

struct Gradients {
  std::size_t dim = 0;
  GradMap user;
  GradMap src;
  GradMap cand;
};

namespace detail {

inline Vec& grad_row(GradMap& g, int row, std::size_t dim) {
  auto [it, inserted] = g.try_emplace(row);
  if (inserted) it->second.assign(dim, 0.0);
  return it->second;
}

inline void grad_add(GradMap& g, int row, double coeff, std::span<const double> v,
                     std::size_t dim) {
  axpy(coeff, v, grad_row(g, row, dim));
}

inline void merge_gradmap(GradMap& into, const GradMap& from, std::size_t dim) {
  for (const auto& [row, vec] : from) grad_add(into, row, 1.0, vec, dim);
}

}  // namespace detail

inline void merge_gradients(Gradients& into, const Gradients& from) {
  detail::merge_gradmap(into.user, from.user, into.dim);
  detail::merge_gradmap(into.src, from.src, into.dim);
  detail::merge_gradmap(into.cand, from.cand, into.dim);
}

// Analytic gradients of the instance's pairwise losses through the full
// forward pass, plus 2*l2*row on every touched row (pass l2 = 0 when the
// caller applies regularization itself, as the batch loop does). Mean pooling
// spreads the pooled gradient over the contributing rows; max pooling routes
// each dimension to the recorded winner; the synergy chain reuses the
// per-item vectors cached in the forward state. Rows not referenced by the
// instance receive no entry.
inline Gradients backward(const TrainingInstance& inst, std::span<const ItemId> negatives,
                          const ModelParams& params, const HyperParams& hyper,
                          const ForwardState& fwd, double l2,
                          double* loss_out = nullptr) {
  auto nonpad = inst.non_pad_context();
  if (fwd.items.size() != nonpad.size() ||
      !std::equal(fwd.items.begin(), fwd.items.end(), nonpad.begin())) {
    throw TrainingError("backward: forward state does not match instance context");
  }
  if (negatives.size() != inst.targets.size()) {
    throw TrainingError("backward: expected one negative per target");
  }

  const std::size_t d = params.dim;
  Gradients g;
  g.dim = d;

  Vec query(d, 0.0);  // d r / d w_candidate, shared by every candidate
  if (hyper.ablation != Ablation::DropUser) {
    axpy(1.0, params.user_emb.row(static_cast<std::size_t>(inst.user)), query);
  }
  axpy(1.0, fwd.s, query);
  if (hyper.ablation != Ablation::DropLowOrder) axpy(1.0, fwd.o, query);

  Vec gsum(d, 0.0);  // sum over pairs of delta * (w_neg - w_pos)
  double loss = 0.0;
  for (std::size_t a = 0; a < inst.targets.size(); ++a) {
    ItemId pos = inst.targets[a];
    ItemId neg = negatives[a];
    double r_pos = score(params, inst.user, fwd.s, fwd.o, pos, hyper.ablation);
    double r_neg = score(params, inst.user, fwd.s, fwd.o, neg, hyper.ablation);
    loss += bpr_loss(r_pos, r_neg);
    double delta = sigmoid(r_neg - r_pos);
    detail::grad_add(g.cand, pos, -delta, query, d);
    detail::grad_add(g.cand, neg, delta, query, d);
    auto wp = params.cand_emb.row(static_cast<std::size_t>(pos));
    auto wn = params.cand_emb.row(static_cast<std::size_t>(neg));
    for (std::size_t i = 0; i < d; ++i) gsum[i] += delta * (wn[i] - wp[i]);
  }
  if (loss_out) *loss_out = loss;

  if (hyper.ablation != Ablation::DropUser) {
    detail::grad_add(g.user, inst.user, 1.0, gsum, d);
  }

  const std::size_t n = fwd.items.size();
  auto src_row = [&](std::size_t j) {
    return params.src_emb.row(static_cast<std::size_t>(fwd.items[j]));
  };

  // Association path: s = h + sum_k c^(k) o h.
  Vec grad_h(d);
  const auto& agg = fwd.synergies.aggregated;
  if (agg.empty()) {
    grad_h = gsum;
  } else {
    Vec csum(d, 0.0);
    for (const Vec& c : agg) axpy(1.0, c, csum);
    for (std::size_t i = 0; i < d; ++i) grad_h[i] = gsum[i] * (1.0 + csum[i]);

    // Every aggregated order receives gsum o h, spread 1/n over positions.
    Vec direct(d);
    for (std::size_t i = 0; i < d; ++i) {
      direct[i] = gsum[i] * fwd.h[i] / static_cast<double>(n);
    }

    Vec vtotal(d, 0.0);
    for (std::size_t j = 0; j < n; ++j) axpy(1.0, src_row(j), vtotal);

    const auto& per_item = fwd.synergies.per_item;
    int top = static_cast<int>(agg.size()) + 1;
    std::vector<Vec> grad_t(n, Vec(d, 0.0));       // through c_j^(k) = c_j^(k-1) o t_j
    std::vector<Vec> grad_cur(n, direct);          // gradient on c_j^(top)
    for (int k = top; k >= 2; --k) {
      for (std::size_t j = 0; j < n; ++j) {
        std::span<const double> prev_j =
            k == 2 ? src_row(j) : std::span<const double>(per_item[static_cast<std::size_t>(k - 3)][j]);
        auto vj = src_row(j);
        Vec grad_prev(d);
        for (std::size_t i = 0; i < d; ++i) {
          double t_ji = vtotal[i] - vj[i];
          grad_prev[i] = grad_cur[j][i] * t_ji;
          grad_t[j][i] += grad_cur[j][i] * prev_j[i];
        }
        if (k > 2) {
          for (std::size_t i = 0; i < d; ++i) grad_cur[j][i] = grad_prev[i] + direct[i];
        } else {
          detail::grad_add(g.src, fwd.items[j], 1.0, grad_prev, d);  // c_j^(1) = v_j
        }
      }
    }
    Vec t_total(d, 0.0);
    for (std::size_t j = 0; j < n; ++j) axpy(1.0, grad_t[j], t_total);
    for (std::size_t j = 0; j < n; ++j) {
      Vec others(d);
      for (std::size_t i = 0; i < d; ++i) others[i] = t_total[i] - grad_t[j][i];
      detail::grad_add(g.src, fwd.items[j], 1.0, others, d);
    }
  }

  // High-order pooling.
  if (hyper.pooling == Pooling::Mean) {
    double inv = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) detail::grad_add(g.src, fwd.items[j], inv, grad_h, d);
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      detail::grad_row(g.src, fwd.h_winners[i], d)[i] += grad_h[i];
    }
  }

  // Low-order pooling.
  if (hyper.ablation != Ablation::DropLowOrder) {
    if (hyper.pooling == Pooling::Mean) {
      std::size_t low = std::min(fwd.low_take, n);
      double inv = 1.0 / static_cast<double>(low);
      for (std::size_t j = n - low; j < n; ++j) {
        detail::grad_add(g.src, fwd.items[j], inv, gsum, d);
      }
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        detail::grad_row(g.src, fwd.o_winners[i], d)[i] += gsum[i];
      }
    }
  }

  if (l2 > 0.0) {
    for (auto& [row, vec] : g.user) {
      axpy(2.0 * l2, params.user_emb.row(static_cast<std::size_t>(row)), vec);
    }
    for (auto& [row, vec] : g.src) {
      axpy(2.0 * l2, params.src_emb.row(static_cast<std::size_t>(row)), vec);
    }
    for (auto& [row, vec] : g.cand) {
      axpy(2.0 * l2, params.cand_emb.row(static_cast<std::size_t>(row)), vec);
    }
  }
  return g;
}

// Moment accumulators mirroring the embedding tables. The step counter
// advances once per batch; rows keep stale moments until next touched.
struct AdamState {
  Matrix m_user, v_user;
  Matrix m_src, v_src;
  Matrix m_cand, v_cand;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState make_adam_state(const ModelParams& p) {
  AdamState st;
  st.m_user = Matrix(p.user_emb.rows(), p.dim);
  st.v_user = Matrix(p.user_emb.rows(), p.dim);
  st.m_src = Matrix(p.src_emb.rows(), p.dim);
  st.v_src = Matrix(p.src_emb.rows(), p.dim);
  st.m_cand = Matrix(p.cand_emb.rows(), p.dim);
  st.v_cand = Matrix(p.cand_emb.rows(), p.dim);
  return st;
}

// Bias-corrected Adam applied to the rows present in `grads` only. The pad
// rows of the item tables are never updated.
inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& st,
                      double learning_rate) {
  st.step += 1;
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto update = [&](Matrix& theta, Matrix& m, Matrix& v, const GradMap& g, int skip_row) {
    for (const auto& [row, grad] : g) {
      if (row == skip_row) continue;
      auto t = theta.row(static_cast<std::size_t>(row));
      auto mr = m.row(static_cast<std::size_t>(row));
      auto vr = v.row(static_cast<std::size_t>(row));
      for (std::size_t i = 0; i < grad.size(); ++i) {
        mr[i] = st.beta1 * mr[i] + (1.0 - st.beta1) * grad[i];
        vr[i] = st.beta2 * vr[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        double m_hat = mr[i] / bc1;
        double v_hat = vr[i] / bc2;
        t[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + st.epsilon);
      }
    }
  };
  update(params.user_emb, st.m_user, st.v_user, grads.user, -1);
  update(params.src_emb, st.m_src, st.v_src, grads.src, static_cast<int>(params.pad()));
  update(params.cand_emb, st.m_cand, st.v_cand, grads.cand, static_cast<int>(params.pad()));
}

struct TrainOptions {
  // Train on the validation range too (final retraining); checkpoint
  // selection is disabled because nothing is held out, and the final-epoch
  // parameters are returned.
  bool include_validation = false;
  std::ostream* progress = nullptr;
};

struct TrainReport {
  struct Checkpoint {
    int epoch = 0;
    bool has_metrics = false;  // false in final-retraining mode
    double recall10 = 0.0;
    double ndcg10 = 0.0;
    double mean_loss = 0.0;
    double seconds_per_epoch = 0.0;  // mean wall clock over the epochs since the last checkpoint
  };
  std::vector<Checkpoint> checkpoints;
  int best_epoch = 0;
  double best_recall10 = 0.0;
  double total_seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// BPR training with uniform negative sampling (one fresh negative per target
// per epoch), shuffled batches, batch-level L2 on touched rows, sparse Adam,
// and validation Recall@10 checkpoints every validate_every epochs. Returns
// the parameters of the best checkpoint. Deterministic given (dataset, plan,
// hyper): the seed drives init, shuffling and sampling.
inline TrainResult train(const Dataset& ds, const SplitPlan& plan, const HyperParams& hyper,
                         const TrainOptions& opt = {}) {
  hyper.validate();
  auto t_start = std::chrono::steady_clock::now();
  Rng rng(hyper.seed);
  ModelParams params =
      init_params(ds.num_users, ds.num_items, static_cast<std::size_t>(hyper.d), rng);
  TrainReport report;
  if (hyper.max_epochs == 0) return {std::move(params), std::move(report)};

  auto instances = make_instances(ds, plan, static_cast<std::size_t>(hyper.n_h),
                                  static_cast<std::size_t>(hyper.n_p), opt.include_validation);
  AdamState adam = make_adam_state(params);
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ModelParams best;
  double best_recall = -1.0;
  std::vector<ItemId> negatives(static_cast<std::size_t>(hyper.n_p));

  auto checkpoint_start = std::chrono::steady_clock::now();
  int epochs_since_checkpoint = 0;
  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    ++epochs_since_checkpoint;
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t pair_count = 0;

    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(hyper.batch_size)) {
      std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(hyper.batch_size));
      Gradients batch;
      batch.dim = params.dim;
      for (std::size_t idx = begin; idx < end; ++idx) {
        const TrainingInstance& inst = instances[order[idx]];
        ForwardState fwd = forward(params, hyper, inst.context);
        for (std::size_t a = 0; a < negatives.size(); ++a) {
          negatives[a] = sample_negative(inst.targets, ds.num_items, rng);
        }
        double loss = 0.0;
        Gradients g = backward(inst, negatives, params, hyper, fwd, 0.0, &loss);
        if (!std::isfinite(loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(begin / hyper.batch_size) +
                              ", user " + std::to_string(inst.user) + ", first target " +
                              std::to_string(inst.targets.front()));
        }
        loss_sum += loss;
        pair_count += inst.targets.size();
        merge_gradients(batch, g);
      }
      if (hyper.l2 > 0.0) {
        for (auto& [row, vec] : batch.user) {
          axpy(2.0 * hyper.l2, params.user_emb.row(static_cast<std::size_t>(row)), vec);
        }
        for (auto& [row, vec] : batch.src) {
          axpy(2.0 * hyper.l2, params.src_emb.row(static_cast<std::size_t>(row)), vec);
        }
        for (auto& [row, vec] : batch.cand) {
          axpy(2.0 * hyper.l2, params.cand_emb.row(static_cast<std::size_t>(row)), vec);
        }
      }
      adam_step(params, batch, adam, hyper.learning_rate);
    }

    if (epoch % hyper.validate_every == 0 || epoch == hyper.max_epochs) {
      auto now = std::chrono::steady_clock::now();
      TrainReport::Checkpoint ck;
      ck.epoch = epoch;
      ck.mean_loss = pair_count > 0 ? loss_sum / static_cast<double>(pair_count) : 0.0;
      ck.seconds_per_epoch = std::chrono::duration<double>(now - checkpoint_start).count() /
                             static_cast<double>(epochs_since_checkpoint);
      checkpoint_start = now;
      epochs_since_checkpoint = 0;
      if (!opt.include_validation) {
        EvalOptions eo;
        // recall@10, clamped when the catalogue itself is smaller than 10
        eo.ks = {std::min(10, static_cast<int>(ds.num_items))};
        eo.range = EvalRange::Validation;
        EvalResult er = evaluate(params, hyper, ds, plan, eo);
        ck.has_metrics = true;
        ck.recall10 = er.per_k[0].recall;
        ck.ndcg10 = er.per_k[0].ndcg;
        if (ck.recall10 > best_recall) {
          best_recall = ck.recall10;
          best = params;
          report.best_epoch = epoch;
          report.best_recall10 = ck.recall10;
        }
      }
      report.checkpoints.push_back(ck);
      if (opt.progress) {
        *opt.progress << "epoch " << epoch << ": loss " << ck.mean_loss;
        if (ck.has_metrics) {
          *opt.progress << ", val recall@10 " << ck.recall10 << ", val ndcg@10 " << ck.ndcg10;
        }
        *opt.progress << " (" << ck.seconds_per_epoch << "s/epoch)\n";
      }
    }
  }

  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  if (opt.include_validation || best_recall < 0.0) {
    report.best_epoch = hyper.max_epochs;
    return {std::move(params), std::move(report)};
  }
  return {std::move(best), std::move(report)};
}

}  // namespace seqrec
