#include "pucl/contrastive.hpp"

#include <cmath>
#include <string>

#include "pucl/errors.hpp"

namespace pucl {

namespace {

enum class LabelNeed { kNone, kLabeledViews, kAllViews };

void validate(const EmbeddedBatch& batch, NormCheck check, LabelNeed need) {
  const std::size_t n = batch.views();
  if (n < 2) throw ContractError("embedded batch needs at least two views");
  if (batch.z.rows() != n || batch.indicator.size() != n || batch.labels.size() != n) {
    throw ContractError("embedded batch field lengths disagree");
  }
  if (!(batch.tau > 0.0) || !std::isfinite(batch.tau)) throw ContractError("temperature must be > 0");
  if (!batch.z.all_finite()) throw ContractError("non-finite embedding");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = batch.pair_index[i];
    if (a >= n || a == i || batch.pair_index[a] != i) {
      throw ContractError("pair_index is not a fixed-point-free involution at view " + std::to_string(i));
    }
    if (batch.indicator[i] != 0 && batch.indicator[i] != 1) throw ContractError("indicator must be 0/1");
    if (batch.labels[i] < -1 || batch.labels[i] > 1) throw ContractError("label must be -1, 0 or +1");
    // Sibling views come from one source, so an unlabeled anchor's sibling
    // is never in the labeled set.
    if (batch.indicator[a] != batch.indicator[i] || batch.labels[a] != batch.labels[i]) {
      throw ContractError("views " + std::to_string(i) + " and " + std::to_string(a) +
                          " are siblings with different supervision");
    }
    if (need == LabelNeed::kAllViews && batch.labels[i] == 0) {
      throw ContractError("view " + std::to_string(i) + " has no label");
    }
    if (need == LabelNeed::kLabeledViews && batch.indicator[i] == 1 && batch.labels[i] == 0) {
      throw ContractError("labeled view " + std::to_string(i) + " has no sign");
    }
    if (check == NormCheck::kEnforce) {
      auto row = batch.z.row(i);
      if (std::abs(std::sqrt(dot(row, row)) - 1.0) > kUnitNormTolerance) {
        throw ContractError("embedding row " + std::to_string(i) + " is not unit-norm");
      }
    }
  }
}

// Target weights per anchor: row i holds w_ij for the positives j of anchor
// i. Every supported loss is   scale * sum_i sum_j w_ij (LSE_i - s_ij)
// with s_ij = z_i.z_j / tau and LSE_i over k != i.
LossOutput weighted_nce(const EmbeddedBatch& batch, const Matrix& weights, double scale) {
  const std::size_t n = batch.views();
  const double inv_tau = 1.0 / batch.tau;
  Matrix sim = gemm_nt(batch.z, batch.z);
  for (double& v : sim.data()) v *= inv_tau;

  LossOutput out;
  out.per_anchor.assign(n, 0.0);
  Matrix coeff(n, n);  // d value / d s_ik
  std::vector<double> logits;
  logits.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    double total_weight = 0.0;
    for (std::size_t j = 0; j < n; ++j) total_weight += weights(i, j);
    if (total_weight == 0.0) continue;
    logits.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) logits.push_back(sim(i, k));
    }
    const double lse = log_sum_exp(logits);
    double loss = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || weights(i, j) == 0.0) continue;
      loss += weights(i, j) * (lse - sim(i, j));
    }
    out.per_anchor[i] = loss;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      coeff(i, k) = scale * (total_weight * std::exp(sim(i, k) - lse) - weights(i, k));
    }
  }
  double sum = 0.0;
  for (double v : out.per_anchor) sum += v;
  out.value = scale * sum;

  // s_ik depends on z_i and z_k symmetrically.
  Matrix sym(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) sym(i, k) = (coeff(i, k) + coeff(k, i)) * inv_tau;
  }
  out.grad_z = gemm(sym, batch.z);
  return out;
}

std::vector<std::size_t> labeled_views(const EmbeddedBatch& batch) {
  std::vector<std::size_t> p;
  for (std::size_t i = 0; i < batch.views(); ++i) {
    if (batch.indicator[i] == 1) p.push_back(i);
  }
  return p;
}

void add_info_nce_weights(const EmbeddedBatch& batch, Matrix& w, bool unlabeled_only) {
  for (std::size_t i = 0; i < batch.views(); ++i) {
    if (unlabeled_only && batch.indicator[i] == 1) continue;
    w(i, batch.pair_index[i]) += 1.0;
  }
}

// Returns false when fewer than two views are labeled.
bool add_labeled_weights(const EmbeddedBatch& batch, Matrix& w) {
  const auto p = labeled_views(batch);
  if (p.size() < 2) return false;
  const double each = 1.0 / static_cast<double>(p.size() - 1);
  for (std::size_t i : p) {
    for (std::size_t j : p) {
      if (j != i) w(i, j) += each;
    }
  }
  return true;
}

void add_unlabeled_weights(const EmbeddedBatch& batch, double pi, Matrix& w) {
  const auto p = labeled_views(batch);
  const double positive_each = pi / static_cast<double>(p.size() + 1);
  for (std::size_t i = 0; i < batch.views(); ++i) {
    if (batch.indicator[i] == 1) continue;
    for (std::size_t j : p) w(i, j) += positive_each;
    w(i, batch.pair_index[i]) += positive_each + (1.0 - pi);
  }
}

}  // namespace

LossOutput info_nce(const EmbeddedBatch& batch, NormCheck check) {
  validate(batch, check, LabelNeed::kNone);
  const std::size_t n = batch.views();
  Matrix w(n, n);
  add_info_nce_weights(batch, w, false);
  return weighted_nce(batch, w, 1.0 / static_cast<double>(n));
}

LossOutput scl(const EmbeddedBatch& batch, NormCheck check) {
  validate(batch, check, LabelNeed::kAllViews);
  const std::size_t n = batch.views();
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t same = 0;
    for (std::size_t j = 0; j < n; ++j) same += (j != i && batch.labels[j] == batch.labels[i]);
    // same >= 1: the sibling always shares the anchor's label.
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && batch.labels[j] == batch.labels[i]) w(i, j) = 1.0 / static_cast<double>(same);
    }
  }
  return weighted_nce(batch, w, 1.0 / static_cast<double>(n));
}

LossOutput punce_labeled(const EmbeddedBatch& batch, NormCheck check) {
  validate(batch, check, LabelNeed::kNone);
  const std::size_t n = batch.views();
  Matrix w(n, n);
  const bool active = add_labeled_weights(batch, w);
  LossOutput out = weighted_nce(batch, w, 1.0);
  if (!active) out.degenerate_labeled = 1;
  return out;
}

LossOutput punce_unlabeled(const EmbeddedBatch& batch, ClassPrior prior, NormCheck check) {
  validate(batch, check, LabelNeed::kNone);
  const std::size_t n = batch.views();
  Matrix w(n, n);
  add_unlabeled_weights(batch, prior.pi(), w);
  return weighted_nce(batch, w, 1.0);
}

LossOutput punce(const EmbeddedBatch& batch, ClassPrior prior, NormCheck check) {
  validate(batch, check, LabelNeed::kNone);
  const std::size_t n = batch.views();
  Matrix w(n, n);
  const bool active = add_labeled_weights(batch, w);
  add_unlabeled_weights(batch, prior.pi(), w);
  LossOutput out = weighted_nce(batch, w, 1.0 / static_cast<double>(n));
  if (!active) out.degenerate_labeled = 1;
  return out;
}

LossOutput scl_pu(const EmbeddedBatch& batch, NormCheck check) {
  validate(batch, check, LabelNeed::kNone);
  const std::size_t n = batch.views();
  Matrix w(n, n);
  const bool active = add_labeled_weights(batch, w);
  add_info_nce_weights(batch, w, true);
  LossOutput out = weighted_nce(batch, w, 1.0 / static_cast<double>(n));
  if (!active) out.degenerate_labeled = 1;
  return out;
}

LossOutput punce_pnu(const EmbeddedBatch& batch, ClassPrior prior, NormCheck check) {
  validate(batch, check, LabelNeed::kLabeledViews);
  const std::size_t n = batch.views();
  const double pi = prior.pi();
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.indicator[i] != 1) continue;
    (batch.labels[i] == 1 ? pos : neg).push_back(i);
  }
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.indicator[i] == 1) {
      const auto& same = batch.labels[i] == 1 ? pos : neg;
      const double each = 1.0 / static_cast<double>(same.size() - 1);
      for (std::size_t j : same) {
        if (j != i) w(i, j) += each;
      }
    } else {
      const std::size_t a = batch.pair_index[i];
      const double pos_each = pi / static_cast<double>(pos.size() + 1);
      const double neg_each = (1.0 - pi) / static_cast<double>(neg.size() + 1);
      for (std::size_t j : pos) w(i, j) += pos_each;
      for (std::size_t j : neg) w(i, j) += neg_each;
      w(i, a) += pos_each + neg_each;
    }
  }
  return weighted_nce(batch, w, 1.0 / static_cast<double>(n));
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kInfoNce: return "infonce";
    case LossKind::kScl: return "scl";
    case LossKind::kPunce: return "punce";
    case LossKind::kSclPu: return "scl_pu";
    case LossKind::kPuncePnu: return "pnu_punce";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::kInfoNce, LossKind::kScl, LossKind::kPunce, LossKind::kSclPu,
                     LossKind::kPuncePnu}) {
    if (to_string(k) == name) return k;
  }
  throw ArgumentError("unknown loss kind '" + std::string(name) + "'");
}

LossOutput contrastive_loss(LossKind kind, const EmbeddedBatch& batch, ClassPrior prior,
                            NormCheck check) {
  switch (kind) {
    case LossKind::kInfoNce: return info_nce(batch, check);
    case LossKind::kScl: return scl(batch, check);
    case LossKind::kPunce: return punce(batch, prior, check);
    case LossKind::kSclPu: return scl_pu(batch, check);
    case LossKind::kPuncePnu: return punce_pnu(batch, prior, check);
  }
  throw ArgumentError("unknown loss kind");
}

}  // namespace pucl
