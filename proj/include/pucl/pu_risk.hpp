#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "pucl/data.hpp"

namespace pucl {

// Scores f(x) = v . g_B(x) with their observed indicators.
struct LogitBatch {
  std::vector<double> logits;
  std::vector<int> indicator;
  ClassPrior prior;
};

struct RiskOutput {
  double value = 0.0;
  std::vector<double> grad_logits;
};

// log(1 + exp(-y z)), evaluated without overflow.
double logistic_loss(double z, int y);
// d/dz logistic_loss(z, y) = -y * sigmoid(-y z)
double logistic_loss_grad(double z, int y);
double sigmoid(double z);

// Unlabeled samples treated as negatives.
RiskOutput pn_risk(const LogitBatch& batch);

// Unbiased PU risk:
//   pi * E_P l(z,+1) + E_U l(z,-1) - pi * E_P l(z,-1)
RiskOutput upu_risk(const LogitBatch& batch);

// Non-negative PU risk: the negative-class part of uPU is clamped at zero,
// and no gradient flows through it while clamped.
RiskOutput nnpu_risk(const LogitBatch& batch);

// c = p(s=1 | y=1) estimated as the mean labeled-vs-unlabeled probability
// on held-out labeled positives.
double pvu_calibrate(std::span<const double> s_probabilities_on_labeled);

struct CalibratedPosterior {
  double value = 0.0;
  bool clipped = false;  // p_s exceeded c
};

CalibratedPosterior pvu_posterior(double p_s, double c);

enum class RiskKind { kPN, kPvU, kUPU, kNNPU };

std::string_view to_string(RiskKind kind);
RiskKind parse_risk_kind(std::string_view name);

// The differentiable training risk for a probe of the given kind. PvU trains
// on s-labels, so it shares the PN risk.
RiskOutput pu_risk(RiskKind kind, const LogitBatch& batch);

}  // namespace pucl
