#include "pucl/pu_risk.hpp"

#include <cmath>
#include <string>

#include "pucl/errors.hpp"

namespace pucl {

namespace {

void check_batch(const LogitBatch& batch) {
  if (batch.logits.size() != batch.indicator.size()) throw ArgumentError("logit/indicator length mismatch");
  for (double z : batch.logits) {
    if (!std::isfinite(z)) throw ArgumentError("non-finite logit");
  }
  for (int s : batch.indicator) {
    if (s != 0 && s != 1) throw ArgumentError("indicator must be 0 or 1");
  }
}

struct Split {
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
};

Split count(const LogitBatch& batch) {
  Split c;
  for (int s : batch.indicator) (s == 1 ? c.labeled : c.unlabeled)++;
  return c;
}

// Shared pieces of uPU and nnPU.
struct PuTerms {
  double positive = 0.0;  // pi * E_P l(z,+1)
  double negative = 0.0;  // E_U l(z,-1) - pi * E_P l(z,-1)
  std::vector<double> grad_positive;
  std::vector<double> grad_negative;
};

PuTerms pu_terms(const LogitBatch& batch) {
  check_batch(batch);
  const Split c = count(batch);
  if (c.labeled == 0 || c.unlabeled == 0) {
    throw ArgumentError("PU risk needs at least one labeled and one unlabeled sample");
  }
  const double pi = batch.prior.pi();
  const double inv_p = 1.0 / static_cast<double>(c.labeled);
  const double inv_u = 1.0 / static_cast<double>(c.unlabeled);
  const std::size_t n = batch.logits.size();
  PuTerms t;
  t.grad_positive.assign(n, 0.0);
  t.grad_negative.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = batch.logits[i];
    if (batch.indicator[i] == 1) {
      t.positive += pi * inv_p * logistic_loss(z, 1);
      t.grad_positive[i] = pi * inv_p * logistic_loss_grad(z, 1);
      t.negative -= pi * inv_p * logistic_loss(z, -1);
      t.grad_negative[i] = -pi * inv_p * logistic_loss_grad(z, -1);
    } else {
      t.negative += inv_u * logistic_loss(z, -1);
      t.grad_negative[i] = inv_u * logistic_loss_grad(z, -1);
    }
  }
  return t;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_loss(double z, int y) {
  const double m = -static_cast<double>(y) * z;
  // softplus(m) = max(m, 0) + log1p(exp(-|m|))
  return std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m)));
}

double logistic_loss_grad(double z, int y) {
  const double yd = static_cast<double>(y);
  return -yd * sigmoid(-yd * z);
}

RiskOutput pn_risk(const LogitBatch& batch) {
  check_batch(batch);
  const std::size_t n = batch.logits.size();
  if (n == 0) throw ArgumentError("PN risk of empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  RiskOutput out;
  out.grad_logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = batch.indicator[i] == 1 ? 1 : -1;
    out.value += inv_n * logistic_loss(batch.logits[i], y);
    out.grad_logits[i] = inv_n * logistic_loss_grad(batch.logits[i], y);
  }
  return out;
}

RiskOutput upu_risk(const LogitBatch& batch) {
  PuTerms t = pu_terms(batch);
  RiskOutput out;
  out.value = t.positive + t.negative;
  out.grad_logits.resize(t.grad_positive.size());
  for (std::size_t i = 0; i < out.grad_logits.size(); ++i) {
    out.grad_logits[i] = t.grad_positive[i] + t.grad_negative[i];
  }
  return out;
}

RiskOutput nnpu_risk(const LogitBatch& batch) {
  PuTerms t = pu_terms(batch);
  const bool active = t.negative >= 0.0;
  RiskOutput out;
  out.value = t.positive + (active ? t.negative : 0.0);
  out.grad_logits.resize(t.grad_positive.size());
  for (std::size_t i = 0; i < out.grad_logits.size(); ++i) {
    out.grad_logits[i] = t.grad_positive[i] + (active ? t.grad_negative[i] : 0.0);
  }
  return out;
}

double pvu_calibrate(std::span<const double> s_probabilities_on_labeled) {
  if (s_probabilities_on_labeled.empty()) throw ArgumentError("PvU calibration needs held-out positives");
  double sum = 0.0;
  for (double p : s_probabilities_on_labeled) {
    if (!(p > 0.0 && p <= 1.0)) throw ArgumentError("calibration probabilities must lie in (0, 1]");
    sum += p;
  }
  return sum / static_cast<double>(s_probabilities_on_labeled.size());
}

CalibratedPosterior pvu_posterior(double p_s, double c) {
  if (!(c > 0.0)) throw ArgumentError("calibration constant c must be > 0");
  if (p_s > c) return {1.0, true};
  return {p_s / c, false};
}

std::string_view to_string(RiskKind kind) {
  switch (kind) {
    case RiskKind::kPN: return "pn";
    case RiskKind::kPvU: return "pvu";
    case RiskKind::kUPU: return "upu";
    case RiskKind::kNNPU: return "nnpu";
  }
  return "unknown";
}

RiskKind parse_risk_kind(std::string_view name) {
  for (RiskKind k : {RiskKind::kPN, RiskKind::kPvU, RiskKind::kUPU, RiskKind::kNNPU}) {
    if (to_string(k) == name) return k;
  }
  throw ArgumentError("unknown risk kind '" + std::string(name) + "'");
}

RiskOutput pu_risk(RiskKind kind, const LogitBatch& batch) {
  switch (kind) {
    case RiskKind::kPN:
    case RiskKind::kPvU: return pn_risk(batch);
    case RiskKind::kUPU: return upu_risk(batch);
    case RiskKind::kNNPU: return nnpu_risk(batch);
  }
  throw ArgumentError("unknown risk kind");
}

}  // namespace pucl
