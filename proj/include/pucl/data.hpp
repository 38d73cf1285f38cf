#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pucl/numerics.hpp"

namespace pucl {

// Stream ids for RngStream; each consumer of randomness draws from its own
// stream so that changing one stage never perturbs another.
namespace streams {
inline constexpr std::uint64_t kSynthTrain = 1;
inline constexpr std::uint64_t kSynthTest = 2;
inline constexpr std::uint64_t kMakePU = 3;
inline constexpr std::uint64_t kMakePNU = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kPretrainShuffle = 6;
inline constexpr std::uint64_t kAugment = 7;
inline constexpr std::uint64_t kProbeShuffle = 8;
inline constexpr std::uint64_t kHoldout = 9;
}  // namespace streams

// Probability that a sample is positive. The PU simulation stores the
// probability among *unlabeled* samples, p(y=+1 | s=0).
class ClassPrior {
 public:
  ClassPrior() = default;
  explicit ClassPrior(double pi);
  double pi() const noexcept { return pi_; }

 private:
  double pi_ = 0.5;
};

ClassPrior exact_pi(std::size_t p_star, std::size_t n_star, std::size_t n_labeled);

struct BinaryDataset {
  Matrix features;
  std::vector<int> labels;  // +1 / -1

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t count_positive() const noexcept;
  // Throws ArgumentError unless shapes agree, labels are +-1, features are
  // finite and both classes are present.
  void validate() const;
};

// Features with observed indicator s. Ground truth is kept for evaluation
// only and is not part of TrainingView.
class PUDataset {
 public:
  PUDataset(Matrix features, std::vector<int> indicator, std::vector<int> hidden_labels,
            ClassPrior prior);

  const Matrix& features() const noexcept { return features_; }
  std::span<const int> indicator() const noexcept { return indicator_; }
  std::span<const int> hidden_labels() const noexcept { return hidden_labels_; }
  ClassPrior prior() const noexcept { return prior_; }
  std::size_t size() const noexcept { return indicator_.size(); }
  std::size_t labeled_count() const noexcept;

 private:
  Matrix features_;
  std::vector<int> indicator_;
  std::vector<int> hidden_labels_;
  ClassPrior prior_;
};

class PNUDataset {
 public:
  // observed_labels: +1 / -1 where labeled, 0 where unlabeled.
  PNUDataset(Matrix features, std::vector<int> observed_labels, std::vector<int> hidden_labels,
             ClassPrior prior);

  const Matrix& features() const noexcept { return features_; }
  std::span<const int> observed_labels() const noexcept { return observed_; }
  std::span<const int> hidden_labels() const noexcept { return hidden_labels_; }
  ClassPrior prior() const noexcept { return prior_; }
  std::size_t size() const noexcept { return observed_.size(); }
  std::size_t labeled_count() const noexcept;
  bool fully_labeled() const noexcept { return labeled_count() == size(); }

 private:
  Matrix features_;
  std::vector<int> observed_;
  std::vector<int> hidden_labels_;
  ClassPrior prior_;
};

enum class Supervision { kPU, kPNU };

// What a training loop may see: features, indicator, observed labels.
struct TrainingView {
  const Matrix* features = nullptr;
  std::vector<int> indicator;  // s
  std::vector<int> observed;   // +1 / -1 where labeled, 0 otherwise
  ClassPrior prior;
  Supervision kind = Supervision::kPU;

  std::size_t size() const noexcept { return indicator.size(); }
};

TrainingView training_view(const PUDataset& ds);
TrainingView training_view(const PNUDataset& ds);

struct AugmentConfig {
  double noise_sigma = 0.1;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double mask_prob = 0.05;

  void validate() const;
  static AugmentConfig identity() { return {0.0, 1.0, 1.0, 0.0}; }
};

// 2b augmented views. Views 2i and 2i+1 (zero-based) come from source i.
struct MultiViewBatch {
  Matrix inputs;
  std::vector<std::size_t> pair_index;
  std::vector<int> indicator;
  std::vector<int> labels;  // 0 = no label
  std::vector<std::size_t> source_index;

  std::size_t views() const noexcept { return pair_index.size(); }
};

MultiViewBatch make_multiview_batch(const TrainingView& view, std::span<const std::size_t> sources,
                                    const AugmentConfig& cfg, RngStream& rng);

// Applies jitter, then scaling, then coordinate masking to one row.
void augment_row(std::span<double> row, const AugmentConfig& cfg, RngStream& rng);

BinaryDataset synth_gaussians(std::size_t n, std::size_t d, double separation, double pi_true,
                              std::uint64_t seed, std::uint64_t stream = streams::kSynthTrain);

PUDataset make_pu(const BinaryDataset& ds, std::size_t n_labeled, std::uint64_t seed);
PNUDataset make_pnu(const BinaryDataset& ds, std::size_t n_labeled, std::uint64_t seed);

// CSV: header feature_0..feature_{d-1},y[,s]. Reals at 17 significant digits.
BinaryDataset load_csv_dataset(const std::filesystem::path& path);
PUDataset load_pu_csv(const std::filesystem::path& path);
PNUDataset load_pnu_csv(const std::filesystem::path& path);
void write_csv(const BinaryDataset& ds, const std::filesystem::path& path);
void write_csv(const PUDataset& ds, const std::filesystem::path& path);
void write_csv(const PNUDataset& ds, const std::filesystem::path& path);

}  // namespace pucl
