#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "pucl/data.hpp"
#include "pucl/numerics.hpp"

namespace pucl {

inline constexpr double kDefaultTemperature = 0.5;
inline constexpr double kUnitNormTolerance = 1e-9;

// Unit-normalized embeddings of a multi-view batch. Siblings (i, a(i)) must
// share indicator and label. labels[i] == 0 means "no label".
struct EmbeddedBatch {
  Matrix z;
  std::vector<std::size_t> pair_index;
  std::vector<int> indicator;
  std::vector<int> labels;
  double tau = kDefaultTemperature;

  std::size_t views() const noexcept { return pair_index.size(); }
};

struct LossOutput {
  double value = 0.0;
  std::vector<double> per_anchor;
  Matrix grad_z;
  // Batches whose labeled set had fewer than two views; the labeled term was
  // dropped for them.
  std::size_t degenerate_labeled = 0;
};

// kSkip bypasses only the unit-norm check, for finite-difference probes
// that leave the sphere.
enum class NormCheck { kEnforce, kSkip };

// Self-supervised loss: the sibling view is the only positive.
LossOutput info_nce(const EmbeddedBatch& batch, NormCheck check = NormCheck::kEnforce);

// Supervised contrastive loss; every view needs a label.
LossOutput scl(const EmbeddedBatch& batch, NormCheck check = NormCheck::kEnforce);

// Labeled-anchor term of puNCE. `value` is the raw sum over labeled anchors
// (no 1/2b); per_anchor is zero on unlabeled views.
LossOutput punce_labeled(const EmbeddedBatch& batch, NormCheck check = NormCheck::kEnforce);

// Unlabeled-anchor term of puNCE: each unlabeled anchor is a positive with
// weight pi (pulled toward every labeled view and its sibling) and a
// negative with weight 1 - pi (pulled toward its sibling only). Raw sum.
LossOutput punce_unlabeled(const EmbeddedBatch& batch, ClassPrior prior,
                           NormCheck check = NormCheck::kEnforce);

// (labeled term + unlabeled term) / 2b.
LossOutput punce(const EmbeddedBatch& batch, ClassPrior prior, NormCheck check = NormCheck::kEnforce);

// Supervised term on labeled anchors, infoNCE on unlabeled anchors, / 2b.
LossOutput scl_pu(const EmbeddedBatch& batch, NormCheck check = NormCheck::kEnforce);

// puNCE with labeled positives and negatives. Labeled anchors use SCL over
// the labeled views of their class; unlabeled anchors split into a positive
// branch over P + {a(i)} and a negative branch over N + {a(i)}.
LossOutput punce_pnu(const EmbeddedBatch& batch, ClassPrior prior,
                     NormCheck check = NormCheck::kEnforce);

enum class LossKind { kInfoNce, kScl, kPunce, kSclPu, kPuncePnu };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

LossOutput contrastive_loss(LossKind kind, const EmbeddedBatch& batch, ClassPrior prior,
                            NormCheck check = NormCheck::kEnforce);

}  // namespace pucl
