#include "fedul/recmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

namespace fedul {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable -[t ln s(x) + (1-t) ln(1 - s(x))].
double bce(double logit, double target) {
  return std::max(logit, 0.0) - target * logit + std::log1p(std::exp(-std::abs(logit)));
}

}  // namespace

std::size_t ItemIndex::pos(ItemId id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id)
    throw DimensionError("ItemIndex: unknown item " + std::to_string(id));
  return static_cast<std::size_t>(it - ids.begin());
}

double score(std::span<const double> em_u, std::span<const double> em_i,
             const ScorerParams& psi) {
  if (em_u.size() != em_i.size())
    throw DimensionError("score: embedding dimension mismatch");
  if (psi.kind == ScorerParams::Kind::Dot) return dot(em_u, em_i);

  const std::size_t d = em_u.size();
  if (psi.w_hidden.cols != 2 * d)
    throw DimensionError("score: scorer expects 2d inputs");
  Vec x(2 * d);
  std::copy(em_u.begin(), em_u.end(), x.begin());
  std::copy(em_i.begin(), em_i.end(), x.begin() + static_cast<std::ptrdiff_t>(d));
  Vec a = matvec(psi.w_hidden, x);
  for (std::size_t h = 0; h < a.size(); ++h) a[h] = std::max(a[h] + psi.b_hidden[h], 0.0);
  return dot(psi.w_out, a) + psi.b_out;
}

ScoreBackward score_backward(std::span<const double> em_u, std::span<const double> em_i,
                             const ScorerParams& psi) {
  if (em_u.size() != em_i.size())
    throw DimensionError("score_backward: embedding dimension mismatch");
  ScoreBackward out;
  out.g_em_u.assign(em_u.size(), 0.0);
  out.g_em_i.assign(em_i.size(), 0.0);
  if (psi.kind == ScorerParams::Kind::Dot) {
    out.value = dot(em_u, em_i);
    out.g_em_u.assign(em_i.begin(), em_i.end());
    out.g_em_i.assign(em_u.begin(), em_u.end());
    return out;
  }

  const std::size_t d = em_u.size();
  const std::size_t H = psi.w_hidden.rows;
  if (psi.w_hidden.cols != 2 * d)
    throw DimensionError("score_backward: scorer expects 2d inputs");
  Vec x(2 * d);
  Vec pre(H), act(H);
  std::copy(em_u.begin(), em_u.end(), x.begin());
  std::copy(em_i.begin(), em_i.end(), x.begin() + static_cast<std::ptrdiff_t>(d));
  for (std::size_t h = 0; h < H; ++h) {
    pre[h] = dot(psi.w_hidden.row(h), x) + psi.b_hidden[h];
    act[h] = std::max(pre[h], 0.0);
  }
  out.value = dot(psi.w_out, act) + psi.b_out;

  out.g_psi.w_hidden = DenseMatrix(H, 2 * d);
  out.g_psi.b_hidden.assign(H, 0.0);
  out.g_psi.w_out.assign(H, 0.0);
  out.g_psi.b_out = 1.0;
  Vec g_x(2 * d, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    out.g_psi.w_out[h] = act[h];
    if (pre[h] <= 0.0) continue;
    double g_a = psi.w_out[h];
    out.g_psi.b_hidden[h] = g_a;
    axpy(g_a, x, out.g_psi.w_hidden.row(h));
    axpy(g_a, psi.w_hidden.row(h), g_x);
  }
  std::copy(g_x.begin(), g_x.begin() + static_cast<std::ptrdiff_t>(d), out.g_em_u.begin());
  std::copy(g_x.begin() + static_cast<std::ptrdiff_t>(d), g_x.end(), out.g_em_i.begin());
  return out;
}

RecGrads rec_loss_and_grads(std::span<const double> em_u,
                            const std::vector<ItemId>& positives,
                            const ItemEmbeddings& items, const ScorerParams& psi,
                            std::size_t negatives_per_positive, RngStream& rng) {
  if (positives.empty())
    throw SamplingError("rec_loss_and_grads: user has no training interactions");
  const std::size_t n_items = items.index.size();
  std::unordered_set<ItemId> pos_set(positives.begin(), positives.end());
  if (pos_set.size() >= n_items && negatives_per_positive > 0)
    throw SamplingError("rec_loss_and_grads: no candidate negatives");

  // (item, label) examples: each positive plus sampled non-interacted items.
  std::vector<std::pair<ItemId, double>> examples;
  examples.reserve(positives.size() * (1 + negatives_per_positive));
  for (ItemId p : positives) {
    examples.emplace_back(p, 1.0);
    for (std::size_t k = 0; k < negatives_per_positive; ++k) {
      ItemId neg;
      do {
        neg = items.index.ids[rng.next_below(n_items)];
      } while (pos_set.count(neg));
      examples.emplace_back(neg, 0.0);
    }
  }

  RecGrads out;
  out.g_em_u.assign(em_u.size(), 0.0);
  std::map<ItemId, Vec> item_grads;
  const double scale = 1.0 / static_cast<double>(examples.size());
  bool mlp = psi.kind == ScorerParams::Kind::Mlp;
  if (mlp) {
    out.g_psi.w_hidden = DenseMatrix(psi.w_hidden.rows, psi.w_hidden.cols);
    out.g_psi.b_hidden.assign(psi.b_hidden.size(), 0.0);
    out.g_psi.w_out.assign(psi.w_out.size(), 0.0);
  }

  for (const auto& [item, label] : examples) {
    ScoreBackward sb = score_backward(em_u, items.of(item), psi);
    out.loss += scale * bce(sb.value, label);
    double up = scale * (sigmoid(sb.value) - label);  // dL/ds
    axpy(up, sb.g_em_u, out.g_em_u);
    auto [it, inserted] = item_grads.try_emplace(item, Vec(em_u.size(), 0.0));
    axpy(up, sb.g_em_i, it->second);
    if (mlp) {
      axpy(up, sb.g_psi.w_hidden.data, out.g_psi.w_hidden.data);
      axpy(up, sb.g_psi.b_hidden, out.g_psi.b_hidden);
      axpy(up, sb.g_psi.w_out, out.g_psi.w_out);
      out.g_psi.b_out += up * sb.g_psi.b_out;
    }
  }
  out.g_items.assign(item_grads.begin(), item_grads.end());
  return out;
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size())
    throw DimensionError("sgd_step: size mismatch");
  if (lr <= 0.0) throw DomainError("sgd_step: learning rate must be positive");
  if (!all_finite(grads)) throw NumericsError("sgd_step: non-finite gradient");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void sgd_step(DenseMatrix& params, const DenseMatrix& grads, double lr) {
  if (!params.same_shape(grads)) throw DimensionError("sgd_step: shape mismatch");
  sgd_step(std::span<double>(params.data), std::span<const double>(grads.data), lr);
}

DenseMatrix xavier_init(std::size_t rows, std::size_t cols, RngStream& rng) {
  if (rows == 0 || cols == 0) throw DimensionError("xavier_init: zero dimension");
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix m(rows, cols);
  for (double& v : m.data) v = (2.0 * rng.next_uniform01() - 1.0) * bound;
  return m;
}

}  // namespace fedul
