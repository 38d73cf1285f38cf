#include "pucl/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "pucl/data.hpp"
#include "pucl/errors.hpp"

namespace pucl {

namespace {

Matrix apply_layer(const DenseLayer& layer, const Matrix& x, Matrix* pre_out) {
  Matrix y = gemm(x, layer.weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  if (pre_out) *pre_out = y;
  if (layer.relu) {
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  }
  return y;
}

DenseLayer zero_layer(const DenseLayer& like) {
  return {Matrix(like.in(), like.out()), std::vector<double>(like.out(), 0.0), like.relu};
}

DenseLayer kaiming_layer(std::size_t in, std::size_t out, bool relu, RngStream& rng) {
  DenseLayer l{Matrix(in, out), std::vector<double>(out, 0.0), relu};
  const double stddev = std::sqrt(2.0 / static_cast<double>(in));
  for (double& w : l.weight.data()) w = stddev * rng.normal();
  return l;
}

// Layers traversed by a forward mode, in order.
std::vector<const DenseLayer*> route(const ModelParams& p, ForwardMode mode) {
  std::vector<const DenseLayer*> layers;
  for (const auto& l : p.encoder) layers.push_back(&l);
  if (mode == ForwardMode::kEncode) {
    for (const auto& l : p.projector) layers.push_back(&l);
  } else if (mode == ForwardMode::kFinetune) {
    layers.push_back(&p.head);
  }
  return layers;
}

std::vector<DenseLayer*> route(ModelParams& p, ForwardMode mode) {
  std::vector<DenseLayer*> layers;
  for (auto& l : p.encoder) layers.push_back(&l);
  if (mode == ForwardMode::kEncode) {
    for (auto& l : p.projector) layers.push_back(&l);
  } else if (mode == ForwardMode::kFinetune) {
    layers.push_back(&p.head);
  }
  return layers;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 4);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw std::runtime_error("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t ModelParams::input_dim() const {
  if (encoder.empty()) throw ContractError("model has no encoder layers");
  return encoder.front().in();
}

std::size_t ModelParams::feature_dim() const {
  if (encoder.empty()) throw ContractError("model has no encoder layers");
  return encoder.back().out();
}

std::size_t ModelParams::embedding_dim() const {
  return projector.empty() ? feature_dim() : projector.back().out();
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&](std::span<const double> b) { n += b.size(); });
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  for (const auto& l : encoder) z.encoder.push_back(zero_layer(l));
  for (const auto& l : projector) z.projector.push_back(zero_layer(l));
  z.head = zero_layer(head);
  return z;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each_block([&](std::span<const double> b) { flat.insert(flat.end(), b.begin(), b.end()); });
  return flat;
}

void ModelParams::validate() const {
  if (encoder.empty()) throw ContractError("model has no encoder layers");
  auto check = [](const DenseLayer& l) {
    if (l.bias.size() != l.out()) throw ContractError("bias width mismatch");
    if (!l.weight.all_finite()) throw ContractError("non-finite weight");
    for (double b : l.bias) {
      if (!std::isfinite(b)) throw ContractError("non-finite bias");
    }
  };
  std::size_t width = encoder.front().in();
  for (const auto& l : encoder) {
    check(l);
    if (l.in() != width) throw ContractError("encoder layer widths do not chain");
    width = l.out();
  }
  const std::size_t features = width;
  for (const auto& l : projector) {
    check(l);
    if (l.in() != width) throw ContractError("projector layer widths do not chain");
    width = l.out();
  }
  check(head);
  if (head.in() != features || head.out() != 1) throw ContractError("head must map features to one logit");
}

Matrix project(const ModelParams& params, const Matrix& features, NormPolicy norm) {
  if (features.cols() != params.feature_dim()) throw ArgumentError("feature width mismatch");
  Matrix h = features;
  for (const auto& l : params.projector) h = apply_layer(l, h, nullptr);
  return norm.normalize ? row_l2_normalize(h) : h;
}

Matrix head_logits(const ModelParams& params, const Matrix& features) {
  if (features.cols() != params.feature_dim()) throw ArgumentError("feature width mismatch");
  return apply_layer(params.head, features, nullptr);
}

ParamMask freeze_encoder(const ModelParams& params) {
  return {std::vector<bool>(params.encoder.size(), false),
          std::vector<bool>(params.projector.size(), false), true};
}

ParamMask full_mask(const ModelParams& params) {
  return {std::vector<bool>(params.encoder.size(), true),
          std::vector<bool>(params.projector.size(), true), true};
}

std::string_view to_string(ForwardMode mode) {
  switch (mode) {
    case ForwardMode::kEncode: return "encode";
    case ForwardMode::kFinetune: return "finetune";
    case ForwardMode::kFeatExt: return "feat_ext";
  }
  return "unknown";
}

ForwardMode parse_forward_mode(std::string_view name) {
  for (ForwardMode m : {ForwardMode::kEncode, ForwardMode::kFinetune, ForwardMode::kFeatExt}) {
    if (to_string(m) == name) return m;
  }
  throw ArgumentError("unknown forward mode '" + std::string(name) + "'");
}

ForwardResult forward(const ModelParams& params, const Matrix& x, ForwardMode mode, NormPolicy norm) {
  if (x.cols() != params.input_dim()) {
    throw ArgumentError("input width " + std::to_string(x.cols()) + " != encoder input " +
                        std::to_string(params.input_dim()));
  }
  if (mode != ForwardMode::kEncode && mode != ForwardMode::kFinetune && mode != ForwardMode::kFeatExt) {
    throw ArgumentError("unknown forward mode");
  }
  ForwardResult res;
  ForwardTape& tape = res.tape;
  tape.mode = mode;
  Matrix h = x;
  for (const DenseLayer* layer : route(params, mode)) {
    tape.layer_in.push_back(layer->in());
    tape.layer_out.push_back(layer->out());
    tape.relu.push_back(layer->relu);
    tape.inputs.push_back(h);
    Matrix pre;
    h = apply_layer(*layer, h, &pre);
    tape.pre_activations.push_back(std::move(pre));
  }
  if (mode == ForwardMode::kEncode && norm.normalize) {
    tape.normalized = true;
    tape.unnormalized = h;
    tape.norms.resize(h.rows());
    for (std::size_t r = 0; r < h.rows(); ++r) {
      auto row = h.row(r);
      tape.norms[r] = std::sqrt(dot(row, row));
    }
    h = row_l2_normalize(h);
  }
  tape.output_rows = h.rows();
  tape.output_cols = h.cols();
  res.output = std::move(h);
  return res;
}

BackwardResult backward(const ModelParams& params, const ForwardTape& tape, const Matrix& grad_output) {
  if (grad_output.rows() != tape.output_rows || grad_output.cols() != tape.output_cols) {
    throw ContractError("grad_output shape does not match the forward output");
  }
  const auto layers = route(params, tape.mode);
  if (layers.size() != tape.inputs.size()) throw ContractError("forward tape does not match parameters");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k]->in() != tape.layer_in[k] || layers[k]->out() != tape.layer_out[k] ||
        layers[k]->relu != tape.relu[k]) {
      throw ContractError("forward tape layer " + std::to_string(k) + " does not match parameters");
    }
  }

  BackwardResult res;
  res.grads = params.zeros_like();
  auto grad_layers = route(res.grads, tape.mode);

  Matrix g = grad_output;
  if (tape.normalized) {
    // y = u / |u|  =>  du = (g - y (y . g)) / |u|
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto u = tape.unnormalized.row(r);
      auto gr = g.row(r);
      const double inv = 1.0 / tape.norms[r];
      double yg = 0.0;
      for (std::size_t c = 0; c < gr.size(); ++c) yg += u[c] * inv * gr[c];
      for (std::size_t c = 0; c < gr.size(); ++c) gr[c] = (gr[c] - u[c] * inv * yg) * inv;
    }
  }
  for (std::size_t k = layers.size(); k-- > 0;) {
    if (tape.relu[k]) {
      const Matrix& pre = tape.pre_activations[k];
      auto gd = g.data();
      auto pd = pre.data();
      for (std::size_t i = 0; i < gd.size(); ++i) {
        if (!(pd[i] > 0.0)) gd[i] = 0.0;
      }
    }
    DenseLayer& gl = *grad_layers[k];
    gl.weight = gemm_tn(tape.inputs[k], g);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto row = g.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) gl.bias[c] += row[c];
    }
    g = gemm_nt(g, layers[k]->weight);
  }
  res.grad_input = std::move(g);
  return res;
}

ModelParams init_mlp(std::span<const std::size_t> encoder_sizes,
                     std::span<const std::size_t> projector_sizes, std::uint64_t seed) {
  if (encoder_sizes.size() < 2) throw ArgumentError("encoder needs at least one layer");
  for (std::size_t s : encoder_sizes) {
    if (s == 0) throw ArgumentError("zero layer width");
  }
  for (std::size_t s : projector_sizes) {
    if (s == 0) throw ArgumentError("zero layer width");
  }
  if (!projector_sizes.empty() && projector_sizes.front() != encoder_sizes.back()) {
    throw ArgumentError("projector input must equal the encoder output width");
  }
  RngStream rng(seed, streams::kInit);
  ModelParams p;
  for (std::size_t i = 0; i + 1 < encoder_sizes.size(); ++i) {
    p.encoder.push_back(kaiming_layer(encoder_sizes[i], encoder_sizes[i + 1], true, rng));
  }
  for (std::size_t i = 0; i + 1 < projector_sizes.size(); ++i) {
    const bool last = i + 2 == projector_sizes.size();
    p.projector.push_back(kaiming_layer(projector_sizes[i], projector_sizes[i + 1], !last, rng));
  }
  p.head = kaiming_layer(encoder_sizes.back(), 1, false, rng);
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.encoder.size()));
  put_u32(out, static_cast<std::uint32_t>(params.projector.size()));
  auto manifest = [&](const DenseLayer& l) {
    put_u64(out, l.in());
    put_u64(out, l.out());
    out.put(l.relu ? 1 : 0);
  };
  for (const auto& l : params.encoder) manifest(l);
  for (const auto& l : params.projector) manifest(l);
  manifest(params.head);
  params.for_each_block([&](std::span<const double> block) {
    for (double v : block) put_u64(out, std::bit_cast<std::uint64_t>(v));
  });
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic(kCheckpointMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCheckpointMagic) throw std::runtime_error("not a checkpoint: " + path.string());
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t n_enc = get_u32(in);
  const std::uint32_t n_proj = get_u32(in);
  auto read_layer = [&]() {
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    const int relu = in.get();
    if (!in || rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24)) {
      throw std::runtime_error("corrupt checkpoint manifest");
    }
    return DenseLayer{Matrix(rows, cols), std::vector<double>(cols, 0.0), relu == 1};
  };
  ModelParams p;
  for (std::uint32_t i = 0; i < n_enc; ++i) p.encoder.push_back(read_layer());
  for (std::uint32_t i = 0; i < n_proj; ++i) p.projector.push_back(read_layer());
  p.head = read_layer();
  p.for_each_block([&](std::span<double> block) {
    for (double& v : block) v = std::bit_cast<double>(get_u64(in));
  });
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes in checkpoint");
  p.validate();
  return p;
}

}  // namespace pucl
