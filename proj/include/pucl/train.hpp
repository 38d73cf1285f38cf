#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pucl/contrastive.hpp"
#include "pucl/data.hpp"
#include "pucl/model.hpp"
#include "pucl/pu_risk.hpp"

namespace pucl {

struct TrainConfig {
  LossKind loss = LossKind::kPunce;
  RiskKind risk = RiskKind::kNNPU;
  double tau = kDefaultTemperature;
  std::optional<double> pi_override;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::size_t probe_epochs = 50;
  double lr0 = 0.01;
  double lr_min = 0.0;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  std::optional<double> joint_lambda;
  AugmentConfig augment;
  bool normalize = true;

  void validate() const;
};

struct MetricRecord {
  std::size_t epoch = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

// Append-only; epochs never go backwards for a given (split, metric, seed).
class RunMetrics {
 public:
  void append(MetricRecord record);
  void append(std::size_t epoch, std::string split, std::string metric, double value,
              std::uint64_t seed);
  void merge(const RunMetrics& other);

  std::span<const MetricRecord> records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }
  std::optional<double> last(std::string_view split, std::string_view metric) const;

 private:
  std::vector<MetricRecord> records_;
};

// Header epoch,split,metric,value,seed; values at 17 significant digits.
void write_metrics_csv(const RunMetrics& metrics, const std::filesystem::path& path);
RunMetrics read_metrics_csv(const std::filesystem::path& path);

struct OptState {
  double momentum = 0.9;
  ModelParams buffers;
  std::uint64_t step = 0;

  static OptState for_params(const ModelParams& params, double momentum);
};

double cosine_lr(std::size_t t, std::size_t total, double lr0, double lr_min);

// buf <- momentum * buf + grad; param <- param - lr * buf. Masked groups are
// left untouched, buffers included.
void sgd_step(ModelParams& params, const ModelParams& grads, OptState& opt, double lr,
              const ParamMask& mask);

struct TrainResult {
  ModelParams params;
  RunMetrics metrics;
  std::size_t degenerate_batches = 0;
};

TrainResult pretrain(const TrainConfig& cfg, const PUDataset& data, ModelParams params);
TrainResult pretrain(const TrainConfig& cfg, const PNUDataset& data, ModelParams params);

// Linear probe: encoder and projector frozen, head trained with cfg.risk on
// finetune-mode logits. When `test` is given, per-epoch test accuracy is
// logged. For PvU the head bias is shifted after calibration so that
// sign(logit) thresholds the calibrated posterior at 0.5.
TrainResult probe(const TrainConfig& cfg, ModelParams params, const PUDataset& data,
                  const BinaryDataset* test = nullptr);

// As probe, but every parameter is updatable. With cfg.joint_lambda set the
// objective is lambda * CE(labeled views) + (1 - lambda) * contrastive.
TrainResult finetune(const TrainConfig& cfg, ModelParams params, const PUDataset& data,
                     const BinaryDataset* test = nullptr);

struct Objective {
  double value = 0.0;
  ModelParams grads;
};

Objective joint_objective(const Objective& ce, const Objective& cl, double lambda);

struct EvalResult {
  double accuracy = 0.0;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
  double recall_positive = 0.0;
  double recall_negative = 0.0;

  std::size_t total() const noexcept {
    return true_positive + false_positive + true_negative + false_negative;
  }
};

// Predicts +1 when the finetune logit is >= 0.
EvalResult evaluate(const ModelParams& params, const BinaryDataset& test);
EvalResult evaluate_logits(std::span<const double> logits, std::span<const int> labels);

struct AggregateRow {
  std::size_t epoch = 0;
  std::string split;
  std::string metric;
  double mean = 0.0;
  std::optional<double> stddev;  // sample std, absent for a single run
  std::size_t runs = 0;
};

// Runs must report the same (epoch, split, metric) keys.
std::vector<AggregateRow> aggregate_seeds(std::span<const RunMetrics> runs);

}  // namespace pucl
