#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqrec/data.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/instances.hpp"
#include "seqrec/matrix.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

enum class Pooling { Mean, Max };
enum class Ablation { None, DropLowOrder, DropUser };

inline std::string to_string(Pooling p) { return p == Pooling::Mean ? "mean" : "max"; }
inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::DropLowOrder: return "drop-o";
    case Ablation::DropUser: return "drop-u";
  }
  return "?";
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "mean") return Pooling::Mean;
  if (s == "max") return Pooling::Max;
  throw ConfigError("unknown pooling '" + std::string(s) + "' (expected mean or max)");
}

inline Ablation parse_ablation(std::string_view s) {
  if (s == "none") return Ablation::None;
  if (s == "drop-o") return Ablation::DropLowOrder;
  if (s == "drop-u") return Ablation::DropUser;
  throw ConfigError("unknown ablation '" + std::string(s) +
                    "' (expected none, drop-o or drop-u)");
}

struct HyperParams {
  int d = 64;             // embedding dimension
  int n_h = 4;            // high-order context length
  int n_l = 2;            // low-order context length
  int n_p = 3;            // targets per window
  int synergy_order = 1;  // p; 1 disables synergies
  Pooling pooling = Pooling::Mean;
  Ablation ablation = Ablation::None;
  double l2 = 1e-3;
  double learning_rate = 1e-3;
  int batch_size = 512;
  int max_epochs = 200;
  int validate_every = 20;  // epochs between validation checkpoints
  std::uint64_t seed = 42;

  void validate() const {
    if (d < 1) throw ConfigError("d must be >= 1");
    if (n_h < 1) throw ConfigError("n_h must be >= 1");
    if (n_l < 1 || n_l > n_h) throw ConfigError("n_l must be in [1, n_h]");
    if (n_p < 1) throw ConfigError("n_p must be >= 1");
    if (synergy_order < 1 || synergy_order > n_h) {
      throw ConfigError("p must be in [1, n_h]");
    }
    if (l2 < 0) throw ConfigError("lambda must be >= 0");
    if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (validate_every < 1) throw ConfigError("validate_every must be >= 1");
  }
};

// The three embedding tables. Item tables carry one extra row (the last one)
// for the pad id; the pad row stays exactly zero and is never updated.
struct ModelParams {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t dim = 0;
  Matrix user_emb;  // num_users x d, general preferences
  Matrix src_emb;   // (num_items + 1) x d, items in the role of context
  Matrix cand_emb;  // (num_items + 1) x d, items in the role of candidate

  ItemId pad() const { return static_cast<ItemId>(num_items); }
};

// Uniform init on [-1/sqrt(d), +1/sqrt(d)]; pad rows zeroed afterwards.
inline ModelParams init_params(std::size_t num_users, std::size_t num_items,
                               std::size_t dim, Rng& rng) {
  ModelParams p;
  p.num_users = num_users;
  p.num_items = num_items;
  p.dim = dim;
  p.user_emb = Matrix(num_users, dim);
  p.src_emb = Matrix(num_items + 1, dim);
  p.cand_emb = Matrix(num_items + 1, dim);
  double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& x : p.user_emb.data()) x = rng.next_double(-scale, scale);
  for (double& x : p.src_emb.data()) x = rng.next_double(-scale, scale);
  for (double& x : p.cand_emb.data()) x = rng.next_double(-scale, scale);
  for (double& x : p.src_emb.row(p.pad())) x = 0.0;
  for (double& x : p.cand_emb.row(p.pad())) x = 0.0;
  return p;
}

// Pools the source embeddings of the non-pad items among the last `take_last`
// context entries. Mean divides by the non-pad count; max ignores pad slots.
// With `winners`, records the per-dimension maximizer's item id (max pooling
// only; ties go to the lowest item id).
inline Vec pool(std::span<const ItemId> context, const ModelParams& params,
                Pooling mode, std::size_t take_last,
                std::vector<ItemId>* winners = nullptr) {
  if (take_last > context.size()) throw ModelError("take_last exceeds context length");
  const ItemId pad = params.pad();
  Vec out(params.dim, 0.0);
  std::size_t count = 0;
  if (mode == Pooling::Mean) {
    for (std::size_t i = context.size() - take_last; i < context.size(); ++i) {
      if (context[i] == pad) continue;
      axpy(1.0, params.src_emb.row(static_cast<std::size_t>(context[i])), out);
      ++count;
    }
    if (count == 0) throw ModelError("empty pool: window is all pad");
    for (double& x : out) x /= static_cast<double>(count);
  } else {
    if (winners) winners->assign(params.dim, pad);
    bool first = true;
    for (std::size_t i = context.size() - take_last; i < context.size(); ++i) {
      ItemId item = context[i];
      if (item == pad) continue;
      auto row = params.src_emb.row(static_cast<std::size_t>(item));
      for (std::size_t k = 0; k < params.dim; ++k) {
        bool better = first || row[k] > out[k] ||
                      (row[k] == out[k] && winners && item < (*winners)[k]);
        if (better) {
          out[k] = row[k];
          if (winners) (*winners)[k] = item;
        }
      }
      first = false;
      ++count;
    }
    if (count == 0) throw ModelError("empty pool: window is all pad");
  }
  return out;
}

// Pairwise synergy of two items: the Hadamard product of their embeddings.
inline Vec synergy_pair(std::span<const double> v_j, std::span<const double> v_k) {
  return hadamard(v_j, v_k);
}

// Aggregated synergies and the per-item intermediates kept for backprop.
// aggregated[k-2] is the order-k synergy vector; per_item[k-2][j] the order-k
// synergy of context position j with the rest of the window.
struct SynergyResult {
  std::vector<Vec> aggregated;
  std::vector<std::vector<Vec>> per_item;
};

// Recursive synergies over the non-pad items of the high-order window.
// Order 1 is the item embedding itself; order k sums, over the other window
// positions, the Hadamard product of the position's order-(k-1) synergy with
// the other item's embedding; each order is then averaged over positions.
// Window positions (not distinct ids) are the index set, so repeated items
// contribute once per occurrence. With fewer than two non-pad items the
// result is empty (synergies degenerate to order 1).
inline SynergyResult synergy_orders(std::span<const ItemId> items,
                                    const ModelParams& params, int order) {
  if (order < 1) throw ModelError("synergy order must be >= 1");
  SynergyResult res;
  const std::size_t n = items.size();
  if (order < 2 || n < 2) return res;

  const std::size_t d = params.dim;
  std::vector<Vec> prev(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto row = params.src_emb.row(static_cast<std::size_t>(items[j]));
    prev[j].assign(row.begin(), row.end());
  }
  for (int k = 2; k <= order; ++k) {
    std::vector<Vec> cur(n, Vec(d, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t other = 0; other < n; ++other) {
        if (other == j) continue;
        hadamard_accumulate(prev[j], params.src_emb.row(static_cast<std::size_t>(items[other])),
                            cur[j]);
      }
    }
    Vec agg(d, 0.0);
    for (std::size_t j = 0; j < n; ++j) axpy(1.0, cur[j], agg);
    for (double& x : agg) x /= static_cast<double>(n);
    res.aggregated.push_back(std::move(agg));
    res.per_item.push_back(cur);
    prev = std::move(cur);
  }
  return res;
}

// Latent cross: the high-order embedding plus each aggregated synergy vector
// Hadamard-multiplied into it. Empty synergies leave h unchanged.
inline Vec latent_cross(const Vec& h, std::span<const Vec> synergies) {
  Vec s = h;
  for (const Vec& c : synergies) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += c[i] * h[i];
  }
  return s;
}

// Everything the forward pass computes for one context window, retained so
// the backward pass can reuse it.
struct ForwardState {
  std::vector<ItemId> items;  // non-pad context items, oldest to newest
  std::size_t low_take = 0;   // entries pooled into o (= n_l)
  Vec h;                      // high-order pooled embedding
  Vec o;                      // low-order pooled embedding
  Vec s;                      // association embedding after latent cross
  SynergyResult synergies;
  std::vector<ItemId> h_winners;  // max pooling argmax item per dimension
  std::vector<ItemId> o_winners;
};

inline ForwardState forward(const ModelParams& params, const HyperParams& hyper,
                            std::span<const ItemId> context) {
  if (context.size() != static_cast<std::size_t>(hyper.n_h)) {
    throw ModelError("context length " + std::to_string(context.size()) +
                     " != n_h = " + std::to_string(hyper.n_h));
  }
  ForwardState st;
  const ItemId pad = params.pad();
  for (ItemId it : context) {
    if (it == pad) continue;
    if (it < 0 || it > pad) throw ModelError("item id out of range");
    st.items.push_back(it);
  }
  st.low_take = static_cast<std::size_t>(hyper.n_l);
  bool max_mode = hyper.pooling == Pooling::Max;
  st.h = pool(context, params, hyper.pooling, context.size(),
              max_mode ? &st.h_winners : nullptr);
  st.o = pool(context, params, hyper.pooling, st.low_take,
              max_mode ? &st.o_winners : nullptr);
  st.synergies = synergy_orders(st.items, params, hyper.synergy_order);
  st.s = latent_cross(st.h, st.synergies.aggregated);
  return st;
}

// Recommendation score: u.w + assoc.w + o.w, with the user term dropped under
// DropUser and the low-order term dropped under DropLowOrder.
inline double score(const ModelParams& params, UserId user, const Vec& assoc,
                    const Vec& o, ItemId candidate, Ablation ablation) {
  auto w = params.cand_emb.row(static_cast<std::size_t>(candidate));
  double r = 0.0;
  if (ablation != Ablation::DropUser) {
    r += dot(params.user_emb.row(static_cast<std::size_t>(user)), w);
  }
  r += dot(assoc, w);
  if (ablation != Ablation::DropLowOrder) r += dot(o, w);
  return r;
}

// Scores every candidate row, pad included as the final entry. The pad score
// is reported but the pad item is never recommendable; ranking code masks it.
inline void score_all(const ModelParams& params, const HyperParams& hyper,
                      UserId user, const ForwardState& st, std::span<double> out) {
  if (out.size() != params.num_items + 1) {
    throw ModelError("score output must have num_items + 1 entries");
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = score(params, user, st.s, st.o, static_cast<ItemId>(j), hyper.ablation);
  }
}

inline std::vector<double> score_all(const ModelParams& params, const HyperParams& hyper,
                                     UserId user, std::span<const ItemId> context) {
  ForwardState st = forward(params, hyper, context);
  std::vector<double> out(params.num_items + 1);
  score_all(params, hyper, user, st, out);
  return out;
}

// --- checkpoint format -------------------------------------------------
//
// Binary, little-endian:
//   magic "SRCK", u32 version, u32 byte-order probe (0x01020304),
//   u64 m, n, d,
//   hyper fields (i32 n_h, n_l, n_p, p, u8 pooling, u8 ablation,
//                 f64 l2, f64 lr, i32 batch, i32 epochs, i32 validate_every,
//                 u64 seed),
//   u64 metadata length + bytes (config echo),
//   then U, V, W row-major as f64.
// Write-then-read reproduces scores bit-exactly.

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint");
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data().data()),
            static_cast<std::streamsize>(m.data().size() * sizeof(double)));
}

inline void read_matrix(std::istream& in, Matrix& m, std::size_t rows, std::size_t cols) {
  m = Matrix(rows, cols);
  in.read(reinterpret_cast<char*>(m.data().data()),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in) throw IoError("truncated checkpoint matrix");
}

}  // namespace detail

struct Checkpoint {
  ModelParams params;
  HyperParams hyper;
  std::string metadata;
};

inline void save_checkpoint(const Checkpoint& ck, std::ostream& out) {
  out.write("SRCK", 4);
  detail::write_pod(out, std::uint32_t{1});
  detail::write_pod(out, std::uint32_t{0x01020304});
  detail::write_pod(out, static_cast<std::uint64_t>(ck.params.num_users));
  detail::write_pod(out, static_cast<std::uint64_t>(ck.params.num_items));
  detail::write_pod(out, static_cast<std::uint64_t>(ck.params.dim));
  const HyperParams& h = ck.hyper;
  detail::write_pod(out, std::int32_t{h.n_h});
  detail::write_pod(out, std::int32_t{h.n_l});
  detail::write_pod(out, std::int32_t{h.n_p});
  detail::write_pod(out, std::int32_t{h.synergy_order});
  detail::write_pod(out, static_cast<std::uint8_t>(h.pooling));
  detail::write_pod(out, static_cast<std::uint8_t>(h.ablation));
  detail::write_pod(out, h.l2);
  detail::write_pod(out, h.learning_rate);
  detail::write_pod(out, std::int32_t{h.batch_size});
  detail::write_pod(out, std::int32_t{h.max_epochs});
  detail::write_pod(out, std::int32_t{h.validate_every});
  detail::write_pod(out, h.seed);
  detail::write_pod(out, static_cast<std::uint64_t>(ck.metadata.size()));
  out.write(ck.metadata.data(), static_cast<std::streamsize>(ck.metadata.size()));
  detail::write_matrix(out, ck.params.user_emb);
  detail::write_matrix(out, ck.params.src_emb);
  detail::write_matrix(out, ck.params.cand_emb);
  if (!out) throw IoError("checkpoint write failed");
}

inline Checkpoint load_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SRCK", 4) != 0) {
    throw IoError("not a checkpoint file (bad magic)");
  }
  std::uint32_t version, order;
  detail::read_pod(in, version);
  detail::read_pod(in, order);
  if (version != 1) throw IoError("unsupported checkpoint version");
  if (order != 0x01020304) throw IoError("checkpoint byte order mismatch");

  Checkpoint ck;
  std::uint64_t m, n, d;
  detail::read_pod(in, m);
  detail::read_pod(in, n);
  detail::read_pod(in, d);
  HyperParams& h = ck.hyper;
  std::int32_t i32;
  std::uint8_t u8;
  detail::read_pod(in, i32); h.n_h = i32;
  detail::read_pod(in, i32); h.n_l = i32;
  detail::read_pod(in, i32); h.n_p = i32;
  detail::read_pod(in, i32); h.synergy_order = i32;
  detail::read_pod(in, u8); h.pooling = static_cast<Pooling>(u8);
  detail::read_pod(in, u8); h.ablation = static_cast<Ablation>(u8);
  detail::read_pod(in, h.l2);
  detail::read_pod(in, h.learning_rate);
  detail::read_pod(in, i32); h.batch_size = i32;
  detail::read_pod(in, i32); h.max_epochs = i32;
  detail::read_pod(in, i32); h.validate_every = i32;
  detail::read_pod(in, h.seed);
  h.d = static_cast<int>(d);
  std::uint64_t meta_len;
  detail::read_pod(in, meta_len);
  if (meta_len > (1u << 26)) throw IoError("implausible checkpoint metadata length");
  ck.metadata.resize(meta_len);
  in.read(ck.metadata.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw IoError("truncated checkpoint metadata");
  ck.params.num_users = m;
  ck.params.num_items = n;
  ck.params.dim = d;
  detail::read_matrix(in, ck.params.user_emb, m, d);
  detail::read_matrix(in, ck.params.src_emb, n + 1, d);
  detail::read_matrix(in, ck.params.cand_emb, n + 1, d);
  return ck;
}

}  // namespace seqrec
