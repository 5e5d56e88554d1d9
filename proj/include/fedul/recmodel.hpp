#pragma once

#include <span>
#include <utility>
#include <vector>

#include "fedul/data.hpp"
#include "fedul/numkernel.hpp"

namespace fedul {

/// Sorted item-id index; embedding row r holds the item ids[r].
struct ItemIndex {
  std::vector<ItemId> ids;

  std::size_t pos(ItemId id) const;
  std::size_t size() const { return ids.size(); }
};

struct ItemEmbeddings {
  ItemIndex index;
  DenseMatrix rows;  // |items| x d

  std::span<const double> of(ItemId id) const { return rows.row(index.pos(id)); }
  std::span<double> of(ItemId id) { return rows.row(index.pos(id)); }
};

/// Scoring function: plain dot product, or a one-hidden-layer MLP over the
/// concatenated pair of embeddings (NCF-style).
struct ScorerParams {
  enum class Kind { Dot, Mlp };
  Kind kind = Kind::Dot;
  DenseMatrix w_hidden;  // H x 2d (Mlp only)
  Vec b_hidden;          // H
  Vec w_out;             // H
  double b_out = 0.0;

  bool operator==(const ScorerParams&) const = default;
};

struct ScorerGrads {
  DenseMatrix w_hidden;
  Vec b_hidden;
  Vec w_out;
  double b_out = 0.0;
};

double score(std::span<const double> em_u, std::span<const double> em_i,
             const ScorerParams& psi);

/// score plus gradients w.r.t. both embeddings and the scorer parameters.
struct ScoreBackward {
  double value = 0.0;
  Vec g_em_u;
  Vec g_em_i;
  ScorerGrads g_psi;
};
ScoreBackward score_backward(std::span<const double> em_u, std::span<const double> em_i,
                             const ScorerParams& psi);

struct RecGrads {
  double loss = 0.0;
  Vec g_em_u;
  std::vector<std::pair<ItemId, Vec>> g_items;  // touched rows only, sorted by id
  ScorerGrads g_psi;
};

/// One pass over the user's positives with `negatives_per_positive` sampled
/// negatives each; binary cross-entropy over sigmoid(score), averaged over
/// examples. Gradients are hand-derived and finite-difference checked.
RecGrads rec_loss_and_grads(std::span<const double> em_u,
                            const std::vector<ItemId>& positives,
                            const ItemEmbeddings& items, const ScorerParams& psi,
                            std::size_t negatives_per_positive, RngStream& rng);

/// params -= lr * grads, rejecting non-finite gradients.
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);
void sgd_step(DenseMatrix& params, const DenseMatrix& grads, double lr);

/// Uniform Xavier/Glorot init in +-sqrt(6 / (fan_in + fan_out)) with
/// fan_out = rows, fan_in = cols.
DenseMatrix xavier_init(std::size_t rows, std::size_t cols, RngStream& rng);

}  // namespace fedul
