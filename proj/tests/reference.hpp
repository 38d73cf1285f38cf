#pragma once

// Independent reference implementations used as test oracles. Everything
// here is written directly from the per-anchor definitions, with plain
// loops in long double and no code shared with the library.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "pucl/contrastive.hpp"
#include "pucl/numerics.hpp"

namespace ref {

using pucl::EmbeddedBatch;

inline long double sim(const EmbeddedBatch& b, std::size_t i, std::size_t j) {
  long double s = 0.0L;
  for (std::size_t c = 0; c < b.z.cols(); ++c) s += static_cast<long double>(b.z(i, c)) * b.z(j, c);
  return s / b.tau;
}

// log( exp(s_ij) / sum_{k != i} exp(s_ik) )
inline long double log_softmax(const EmbeddedBatch& b, std::size_t i, std::size_t j) {
  long double denom = 0.0L;
  for (std::size_t k = 0; k < b.views(); ++k) {
    if (k != i) denom += std::exp(sim(b, i, k));
  }
  return sim(b, i, j) - std::log(denom);
}

// Mean of -log_softmax over a set of positives.
inline long double mean_nll(const EmbeddedBatch& b, std::size_t i, const std::vector<std::size_t>& pos) {
  if (pos.empty()) return 0.0L;
  long double s = 0.0L;
  for (std::size_t p : pos) s -= log_softmax(b, i, p);
  return s / static_cast<long double>(pos.size());
}

inline std::vector<std::size_t> labeled(const EmbeddedBatch& b) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b.views(); ++i)
    if (b.indicator[i] == 1) out.push_back(i);
  return out;
}

inline std::vector<std::size_t> without(std::vector<std::size_t> v, std::size_t x) {
  std::vector<std::size_t> out;
  for (std::size_t e : v)
    if (e != x) out.push_back(e);
  return out;
}

inline long double infonce_anchor(const EmbeddedBatch& b, std::size_t i) {
  return -log_softmax(b, i, b.pair_index[i]);
}

inline double info_nce(const EmbeddedBatch& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < b.views(); ++i) s += infonce_anchor(b, i);
  return static_cast<double>(s / b.views());
}

inline double scl(const EmbeddedBatch& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < b.views(); ++i) {
    std::vector<std::size_t> q;
    for (std::size_t j = 0; j < b.views(); ++j)
      if (j != i && b.labels[j] == b.labels[i]) q.push_back(j);
    s += mean_nll(b, i, q);
  }
  return static_cast<double>(s / b.views());
}

// Raw sum over labeled anchors; zero when fewer than two labeled views.
inline double punce_labeled(const EmbeddedBatch& b) {
  const auto p = labeled(b);
  if (p.size() < 2) return 0.0;
  long double s = 0.0L;
  for (std::size_t i : p) s += mean_nll(b, i, without(p, i));
  return static_cast<double>(s);
}

inline long double unlabeled_anchor(const EmbeddedBatch& b, std::size_t i, double pi) {
  auto pos = labeled(b);
  pos.push_back(b.pair_index[i]);
  return pi * mean_nll(b, i, pos) + (1.0L - pi) * infonce_anchor(b, i);
}

inline double punce_unlabeled(const EmbeddedBatch& b, double pi) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < b.views(); ++i)
    if (b.indicator[i] == 0) s += unlabeled_anchor(b, i, pi);
  return static_cast<double>(s);
}

inline double punce(const EmbeddedBatch& b, double pi) {
  return (ref::punce_labeled(b) + ref::punce_unlabeled(b, pi)) / static_cast<double>(b.views());
}

inline double scl_pu(const EmbeddedBatch& b) {
  long double s = ref::punce_labeled(b);
  for (std::size_t i = 0; i < b.views(); ++i)
    if (b.indicator[i] == 0) s += infonce_anchor(b, i);
  return static_cast<double>(s / b.views());
}

inline double punce_pnu(const EmbeddedBatch& b, double pi) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < b.views(); ++i) {
    if (b.indicator[i] != 1) continue;
    (b.labels[i] == 1 ? pos : neg).push_back(i);
  }
  long double s = 0.0L;
  for (std::size_t i = 0; i < b.views(); ++i) {
    if (b.indicator[i] == 1) {
      s += mean_nll(b, i, without(b.labels[i] == 1 ? pos : neg, i));
    } else {
      auto p = pos;
      auto n = neg;
      p.push_back(b.pair_index[i]);
      n.push_back(b.pair_index[i]);
      s += pi * mean_nll(b, i, p) + (1.0L - pi) * mean_nll(b, i, n);
    }
  }
  return static_cast<double>(s / b.views());
}

inline double logistic(double z, int y) { return std::log1p(std::exp(-static_cast<double>(y) * z)); }

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  long double diff = 0.0L, na = 0.0L, nb = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += static_cast<long double>(a[i] - b[i]) * (a[i] - b[i]);
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  const long double scale = std::sqrt(std::max(na, nb));
  if (scale == 0.0L) return 0.0;
  return static_cast<double>(std::sqrt(diff) / scale);
}

}  // namespace ref
