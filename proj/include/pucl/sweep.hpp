#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pucl/train.hpp"

namespace pucl {

struct SweepSpec {
  // Synthetic Gaussian data, regenerated for every seed.
  std::size_t n = 2000;
  std::size_t n_test = 2000;
  std::size_t d = 10;
  double separation = 6.0;
  double pi_true = 0.5;

  std::vector<std::size_t> n_labeled{50, 200, 800};
  std::vector<LossKind> losses{LossKind::kInfoNce, LossKind::kSclPu, LossKind::kPunce};
  std::size_t seeds = 5;
  std::uint64_t base_seed = 1;

  std::vector<std::size_t> encoder_hidden{64, 64, 32};
  std::vector<std::size_t> projector_hidden{16};
  TrainConfig train;
  // Also fine-tune every pretrained checkpoint to pair LP with FT.
  bool with_finetune = false;
};

struct SweepCell {
  LossKind loss = LossKind::kPunce;
  std::size_t n_labeled = 0;
  std::uint64_t seed = 0;
  double lp_accuracy = 0.0;
  std::optional<double> ft_accuracy;
};

struct SweepSummary {
  LossKind loss = LossKind::kPunce;
  std::size_t n_labeled = 0;
  double lp_mean = 0.0;
  std::optional<double> lp_std;
  std::optional<double> ft_mean;
  std::optional<double> ft_std;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepSummary> summary;

  const SweepSummary& at(LossKind loss, std::size_t n_labeled) const;
};

std::vector<std::size_t> architecture(std::size_t input_dim, const std::vector<std::size_t>& hidden);

// Optional progress callback, called after each cell.
SweepResult run_sweep(const SweepSpec& spec,
                      const std::function<void(const SweepCell&)>& on_cell = {});

// Rows n_P, one column per loss, cells "mean±std" in percent.
void write_sweep_table(const SweepResult& result, const std::filesystem::path& path);
// One line per (loss, n_P, seed) with lp and ft accuracies.
void write_sweep_cells(const SweepResult& result, const std::filesystem::path& path);

}  // namespace pucl
