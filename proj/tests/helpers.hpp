#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pucl/contrastive.hpp"
#include "pucl/model.hpp"
#include "pucl/numerics.hpp"

namespace testing {

enum class Sup {
  kNone,      // nothing labeled
  kAll,       // every view labeled positive
  kMixed,     // random sources labeled positive
  kPNU,       // random sources labeled +1 or -1, others unlabeled
  kPNUFull,   // every source labeled +1 or -1
};

inline pucl::Matrix random_unit_rows(std::size_t n, std::size_t k, pucl::RngStream& rng) {
  pucl::Matrix m(n, k);
  for (double& v : m.data()) v = rng.normal();
  return pucl::row_l2_normalize(m);
}

// b sources, 2b views; views 2i and 2i+1 are siblings.
inline pucl::EmbeddedBatch random_batch(std::size_t b, std::size_t k, Sup sup,
                                        pucl::RngStream& rng, double tau = 0.5) {
  pucl::EmbeddedBatch batch;
  batch.tau = tau;
  batch.z = random_unit_rows(2 * b, k, rng);
  for (std::size_t i = 0; i < b; ++i) {
    int s = 0, y = 0;
    switch (sup) {
      case Sup::kNone: break;
      case Sup::kAll: s = 1; y = 1; break;
      case Sup::kMixed:
        if (rng.uniform() < 0.5) { s = 1; y = 1; }
        break;
      case Sup::kPNU:
        if (rng.uniform() < 0.6) { s = 1; y = rng.uniform() < 0.5 ? 1 : -1; }
        break;
      case Sup::kPNUFull: s = 1; y = rng.uniform() < 0.5 ? 1 : -1; break;
    }
    for (std::size_t v = 0; v < 2; ++v) {
      batch.pair_index.push_back(2 * i + 1 - v);
      batch.indicator.push_back(s);
      batch.labels.push_back(y);
    }
  }
  return batch;
}

// The 4-view example: z1 = z2 = (1, 0) labeled, z3 = z4 = (0, 1) unlabeled,
// tau = 1.
inline pucl::EmbeddedBatch four_view_example(bool first_pair_labeled = true) {
  pucl::EmbeddedBatch b;
  b.z = pucl::Matrix{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
  b.pair_index = {1, 0, 3, 2};
  const int s = first_pair_labeled ? 1 : 0;
  b.indicator = {s, s, 0, 0};
  b.labels = {s, s, 0, 0};
  b.tau = 1.0;
  return b;
}

inline double max_abs_diff(const pucl::Matrix& a, const pucl::Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Overwrites every parameter, in for_each_block order.
inline void assign_flat(pucl::ModelParams& p, const std::vector<double>& flat) {
  std::size_t k = 0;
  p.for_each_block([&](std::span<double> block) {
    for (double& v : block) v = flat[k++];
  });
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pucl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
