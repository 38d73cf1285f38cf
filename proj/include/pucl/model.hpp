#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "pucl/numerics.hpp"

namespace pucl {

// y = x W + b, optionally followed by ReLU. weight is (in x out).
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
  bool relu = true;

  std::size_t in() const noexcept { return weight.rows(); }
  std::size_t out() const noexcept { return weight.cols(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Encoder g_B, projector h (contrastive training only) and the linear
// online head v. Gradients share this layout.
struct ModelParams {
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> projector;
  DenseLayer head;

  std::size_t input_dim() const;
  std::size_t feature_dim() const;
  std::size_t embedding_dim() const;
  std::size_t parameter_count() const;

  ModelParams zeros_like() const;
  // Visits every parameter block (weights then bias, encoder, projector,
  // head order); used for flattening and elementwise updates.
  template <typename Fn>
  void for_each_block(Fn&& fn);
  template <typename Fn>
  void for_each_block(Fn&& fn) const;

  std::vector<double> flatten() const;
  // Throws ContractError unless layer widths chain and every value is finite.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Which parameter groups an optimizer step may touch.
struct ParamMask {
  std::vector<bool> encoder;
  std::vector<bool> projector;
  bool head = true;
};

ParamMask freeze_encoder(const ModelParams& params);
ParamMask full_mask(const ModelParams& params);

enum class ForwardMode { kEncode, kFinetune, kFeatExt };

std::string_view to_string(ForwardMode mode);
ForwardMode parse_forward_mode(std::string_view name);

struct NormPolicy {
  bool normalize = true;
};

struct ForwardTape {
  ForwardMode mode = ForwardMode::kFeatExt;
  bool normalized = false;
  // One entry per traversed layer, in order.
  std::vector<std::size_t> layer_in;
  std::vector<std::size_t> layer_out;
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
  std::vector<bool> relu;
  // Projector output before normalization, and its row norms.
  Matrix unnormalized;
  std::vector<double> norms;
  std::size_t output_rows = 0;
  std::size_t output_cols = 0;
};

struct ForwardResult {
  Matrix output;
  ForwardTape tape;
};

// feat_ext: encoder output r. encode: projector(r), row-normalized when the
// policy is on. finetune: head(r), one logit per row.
ForwardResult forward(const ModelParams& params, const Matrix& x, ForwardMode mode,
                      NormPolicy norm = {});

// Projector (and normalization) applied to precomputed encoder features.
Matrix project(const ModelParams& params, const Matrix& features, NormPolicy norm = {});
// Head logits for precomputed encoder features, one column.
Matrix head_logits(const ModelParams& params, const Matrix& features);

struct BackwardResult {
  ModelParams grads;
  Matrix grad_input;
};

BackwardResult backward(const ModelParams& params, const ForwardTape& tape, const Matrix& grad_output);

// Kaiming-normal weights N(0, 2 / fan_in), zero biases. encoder_sizes lists
// widths from input to feature dim; projector_sizes starts at the feature dim
// (empty or a single entry means identity projector).
ModelParams init_mlp(std::span<const std::size_t> encoder_sizes,
                     std::span<const std::size_t> projector_sizes, std::uint64_t seed);

inline constexpr std::string_view kCheckpointMagic = "PUCLCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

template <typename Fn>
void ModelParams::for_each_block(Fn&& fn) {
  for (auto& l : encoder) {
    fn(l.weight.data());
    fn(std::span<double>(l.bias));
  }
  for (auto& l : projector) {
    fn(l.weight.data());
    fn(std::span<double>(l.bias));
  }
  fn(head.weight.data());
  fn(std::span<double>(head.bias));
}

template <typename Fn>
void ModelParams::for_each_block(Fn&& fn) const {
  for (const auto& l : encoder) {
    fn(l.weight.data());
    fn(std::span<const double>(l.bias));
  }
  for (const auto& l : projector) {
    fn(l.weight.data());
    fn(std::span<const double>(l.bias));
  }
  fn(head.weight.data());
  fn(std::span<const double>(head.bias));
}

}  // namespace pucl
