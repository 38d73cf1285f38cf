#include "pucl/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "pucl/errors.hpp"

namespace pucl {

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// k-th of `parts` contiguous chunks of v. When v has fewer elements than
// parts, chunk k is the single element v[k % size] so that no chunk is empty.
std::vector<std::size_t> chunk(const std::vector<std::size_t>& v, std::size_t k, std::size_t parts) {
  if (v.empty()) return {};
  const std::size_t lo = k * v.size() / parts;
  const std::size_t hi = (k + 1) * v.size() / parts;
  if (lo == hi) return {v[k % v.size()]};
  return {v.begin() + static_cast<std::ptrdiff_t>(lo), v.begin() + static_cast<std::ptrdiff_t>(hi)};
}

void shuffle_in_place(std::vector<std::size_t>& v, RngStream& rng) {
  const auto perm = random_permutation(v.size(), rng);
  std::vector<std::size_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[perm[i]];
  v = std::move(out);
}

void check_loss_data(LossKind loss, const TrainingView& view) {
  switch (loss) {
    case LossKind::kInfoNce: return;
    case LossKind::kScl:
      if (view.kind != Supervision::kPNU ||
          std::any_of(view.observed.begin(), view.observed.end(), [](int y) { return y == 0; })) {
        throw ArgumentError("scl requires a fully labeled dataset");
      }
      return;
    case LossKind::kPunce:
    case LossKind::kSclPu:
      if (view.kind != Supervision::kPU) {
        throw ArgumentError(std::string(to_string(loss)) + " requires a PU dataset");
      }
      return;
    case LossKind::kPuncePnu:
      if (view.kind != Supervision::kPNU) throw ArgumentError("pnu_punce requires a PNU dataset");
      return;
  }
}

// Contrastive value and parameter gradients on one multi-view batch.
struct ContrastiveStep {
  Objective objective;
  bool degenerate = false;
};

ContrastiveStep contrastive_step(const TrainConfig& cfg, const ModelParams& params,
                                 const MultiViewBatch& batch, ClassPrior prior) {
  ForwardResult fwd = forward(params, batch.inputs, ForwardMode::kEncode, {cfg.normalize});
  EmbeddedBatch eb{std::move(fwd.output), batch.pair_index, batch.indicator, batch.labels, cfg.tau};
  const NormCheck check = cfg.normalize ? NormCheck::kEnforce : NormCheck::kSkip;
  LossOutput loss = contrastive_loss(cfg.loss, eb, prior, check);
  BackwardResult bw = backward(params, fwd.tape, loss.grad_z);
  return {{loss.value, std::move(bw.grads)}, loss.degenerate_labeled > 0};
}

TrainResult pretrain_view(const TrainConfig& cfg, const TrainingView& view, ModelParams params) {
  cfg.validate();
  params.validate();
  check_loss_data(cfg.loss, view);
  if (view.features->cols() != params.input_dim()) throw ArgumentError("data width != model input width");
  const ClassPrior prior = cfg.pi_override ? ClassPrior(*cfg.pi_override) : view.prior;

  TrainResult res;
  res.params = std::move(params);
  if (cfg.epochs == 0) return res;

  const std::size_t n = view.size();
  const std::size_t b = cfg.batch_size;
  const std::size_t per_epoch = n / b;  // last incomplete batch dropped
  if (per_epoch == 0) throw ArgumentError("batch size exceeds dataset size");
  const std::size_t total = per_epoch * cfg.epochs;

  RngStream shuffle_rng(cfg.seed, streams::kPretrainShuffle);
  RngStream augment_rng(cfg.seed, streams::kAugment);
  OptState opt = OptState::for_params(res.params, cfg.momentum);
  ParamMask mask = full_mask(res.params);
  mask.head = false;

  std::size_t t = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto perm = random_permutation(n, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t degenerate = 0;
    for (std::size_t k = 0; k < per_epoch; ++k) {
      std::span<const std::size_t> sources(perm.data() + k * b, b);
      MultiViewBatch batch = make_multiview_batch(view, sources, cfg.augment, augment_rng);
      ContrastiveStep step = contrastive_step(cfg, res.params, batch, prior);
      loss_sum += step.objective.value;
      degenerate += step.degenerate;
      sgd_step(res.params, step.objective.grads, opt, cosine_lr(t, total, cfg.lr0, cfg.lr_min), mask);
      ++t;
    }
    res.degenerate_batches += degenerate;
    res.metrics.append(epoch, "train", "contrastive_loss", loss_sum / static_cast<double>(per_epoch),
                       cfg.seed);
    res.metrics.append(epoch, "train", "degenerate_batches", static_cast<double>(degenerate), cfg.seed);
  }
  return res;
}

enum class Transfer { kProbe, kFinetune };

// CE over the labeled rows of a batch with their observed labels; zero when
// the batch has none.
Objective labeled_cross_entropy(const ModelParams& params, const Matrix& x,
                                std::span<const int> observed) {
  ForwardResult fwd = forward(params, x, ForwardMode::kFinetune);
  std::size_t labeled = 0;
  for (int y : observed) labeled += (y != 0);
  Matrix g(x.rows(), 1);
  double value = 0.0;
  if (labeled > 0) {
    const double inv = 1.0 / static_cast<double>(labeled);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (observed[i] == 0) continue;
      value += inv * logistic_loss(fwd.output(i, 0), observed[i]);
      g(i, 0) = inv * logistic_loss_grad(fwd.output(i, 0), observed[i]);
    }
  }
  return {value, backward(params, fwd.tape, g).grads};
}

TrainResult transfer(const TrainConfig& cfg, ModelParams params, const PUDataset& data,
                     const BinaryDataset* test, Transfer mode) {
  cfg.validate();
  params.validate();
  if (data.features().cols() != params.input_dim()) throw ArgumentError("data width != model input width");
  const TrainingView view = training_view(data);
  const ClassPrior prior = cfg.pi_override ? ClassPrior(*cfg.pi_override) : view.prior;
  const bool joint = mode == Transfer::kFinetune && cfg.joint_lambda.has_value();
  if (joint) check_loss_data(cfg.loss, view);

  std::vector<std::size_t> labeled, unlabeled, holdout;
  for (std::size_t i = 0; i < view.size(); ++i) (view.indicator[i] == 1 ? labeled : unlabeled).push_back(i);
  if (cfg.risk == RiskKind::kPvU) {
    if (labeled.size() < 2) throw ArgumentError("PvU needs at least two labeled samples");
    const auto h = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(labeled.size()))));
    RngStream holdout_rng(cfg.seed, streams::kHoldout);
    const auto picks = sample_without_replacement(labeled.size(), h, holdout_rng);
    std::vector<bool> held(labeled.size(), false);
    for (std::size_t p : picks) held[p] = true;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < labeled.size(); ++i) (held[i] ? holdout : kept).push_back(labeled[i]);
    labeled = std::move(kept);
  }
  if ((cfg.risk == RiskKind::kUPU || cfg.risk == RiskKind::kNNPU) && !joint &&
      (labeled.empty() || unlabeled.empty())) {
    throw ArgumentError("uPU/nnPU need labeled and unlabeled samples");
  }

  TrainResult res;
  res.params = std::move(params);
  const ParamMask mask = mode == Transfer::kProbe ? freeze_encoder(res.params) : full_mask(res.params);
  // Encoder output never changes while probing.
  Matrix features;
  if (mode == Transfer::kProbe) {
    features = forward(res.params, data.features(), ForwardMode::kFeatExt).output;
  }

  const std::size_t n_train = labeled.size() + unlabeled.size();
  const std::size_t per_epoch = std::max<std::size_t>(1, n_train / cfg.batch_size);
  const std::size_t total = per_epoch * cfg.probe_epochs;
  RngStream shuffle_rng(cfg.seed, streams::kProbeShuffle);
  RngStream augment_rng(cfg.seed, streams::kAugment);
  OptState opt = OptState::for_params(res.params, cfg.momentum);

  std::size_t t = 0;
  for (std::size_t epoch = 1; epoch <= cfg.probe_epochs; ++epoch) {
    shuffle_in_place(labeled, shuffle_rng);
    shuffle_in_place(unlabeled, shuffle_rng);
    double risk_sum = 0.0;
    for (std::size_t k = 0; k < per_epoch; ++k) {
      std::vector<std::size_t> rows = chunk(labeled, k, per_epoch);
      const auto u = chunk(unlabeled, k, per_epoch);
      rows.insert(rows.end(), u.begin(), u.end());

      LogitBatch lb;
      lb.prior = prior;
      for (std::size_t r : rows) lb.indicator.push_back(view.indicator[r]);

      Objective step;
      if (mode == Transfer::kProbe) {
        const Matrix fb = gather_rows(features, rows);
        const Matrix logits = head_logits(res.params, fb);
        lb.logits.assign(logits.data().begin(), logits.data().end());
        RiskOutput risk = pu_risk(cfg.risk, lb);
        Matrix g(rows.size(), 1, risk.grad_logits);
        step.value = risk.value;
        step.grads = res.params.zeros_like();
        step.grads.head.weight = gemm_tn(fb, g);
        for (double v : risk.grad_logits) step.grads.head.bias[0] += v;
      } else if (!joint) {
        const Matrix xb = gather_rows(data.features(), rows);
        ForwardResult fwd = forward(res.params, xb, ForwardMode::kFinetune);
        lb.logits.assign(fwd.output.data().begin(), fwd.output.data().end());
        RiskOutput risk = pu_risk(cfg.risk, lb);
        step.value = risk.value;
        step.grads = backward(res.params, fwd.tape, Matrix(rows.size(), 1, risk.grad_logits)).grads;
      } else {
        const Matrix xb = gather_rows(data.features(), rows);
        std::vector<int> observed;
        for (std::size_t r : rows) observed.push_back(view.observed[r]);
        Objective ce = labeled_cross_entropy(res.params, xb, observed);
        MultiViewBatch mv = make_multiview_batch(view, rows, cfg.augment, augment_rng);
        ContrastiveStep cl = contrastive_step(cfg, res.params, mv, prior);
        res.degenerate_batches += cl.degenerate;
        step = joint_objective(ce, cl.objective, *cfg.joint_lambda);
      }
      risk_sum += step.value;
      sgd_step(res.params, step.grads, opt, cosine_lr(t, total, cfg.lr0, cfg.lr_min), mask);
      ++t;
    }
    res.metrics.append(epoch, "train", joint ? "joint_objective" : "risk",
                       risk_sum / static_cast<double>(per_epoch), cfg.seed);
    if (test != nullptr) {
      res.metrics.append(epoch, "test", "accuracy", evaluate(res.params, *test).accuracy, cfg.seed);
    }
  }

  if (cfg.risk == RiskKind::kPvU && !holdout.empty()) {
    const Matrix xh = gather_rows(data.features(), holdout);
    const Matrix logits = forward(res.params, xh, ForwardMode::kFinetune).output;
    std::vector<double> probs;
    for (double z : logits.data()) probs.push_back(sigmoid(z));
    const double c = pvu_calibrate(probs);
    // sigmoid(f) / c >= 1/2  <=>  f >= logit(c / 2)
    const double half_c = c / 2.0;
    res.params.head.bias[0] -= std::log(half_c / (1.0 - half_c));
    res.metrics.append(cfg.probe_epochs, "train", "pvu_c", c, cfg.seed);
  }
  return res;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("tau must be > 0");
  if (pi_override && !(*pi_override >= 0.0 && *pi_override <= 1.0)) {
    throw ArgumentError("pi override must lie in [0, 1]");
  }
  if (batch_size == 0) throw ArgumentError("batch size must be >= 1");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ArgumentError("lr0 must be > 0");
  if (!(lr_min >= 0.0) || lr_min > lr0) throw ArgumentError("lr_min must lie in [0, lr0]");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
  if (joint_lambda && !(*joint_lambda >= 0.0 && *joint_lambda <= 1.0)) {
    throw ArgumentError("joint lambda must lie in [0, 1]");
  }
  augment.validate();
}

void RunMetrics::append(MetricRecord record) {
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->split == record.split && it->metric == record.metric && it->seed == record.seed) {
      if (record.epoch < it->epoch) {
        throw ArgumentError("metric " + record.split + "/" + record.metric + " epoch went backwards");
      }
      break;
    }
  }
  records_.push_back(std::move(record));
}

void RunMetrics::append(std::size_t epoch, std::string split, std::string metric, double value,
                        std::uint64_t seed) {
  append(MetricRecord{epoch, std::move(split), std::move(metric), value, seed});
}

void RunMetrics::merge(const RunMetrics& other) {
  for (const auto& r : other.records_) append(r);
}

std::optional<double> RunMetrics::last(std::string_view split, std::string_view metric) const {
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->split == split && it->metric == metric) return it->value;
  }
  return std::nullopt;
}

void write_metrics_csv(const RunMetrics& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,split,metric,value,seed\n";
  for (const auto& r : metrics.records()) {
    out << r.epoch << ',' << r.split << ',' << r.metric << ',' << format_real(r.value) << ',' << r.seed
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RunMetrics read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,split,metric,value,seed") {
    throw ParseError(1, "expected header epoch,split,metric,value,seed");
  }
  RunMetrics m;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string epoch, split, metric, value, seed;
    if (!std::getline(ss, epoch, ',') || !std::getline(ss, split, ',') || !std::getline(ss, metric, ',') ||
        !std::getline(ss, value, ',') || !std::getline(ss, seed)) {
      throw ParseError(lineno, "expected 5 fields");
    }
    try {
      m.append(std::stoull(epoch), split, metric, std::stod(value), std::stoull(seed));
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "malformed metric record");
    }
  }
  return m;
}

OptState OptState::for_params(const ModelParams& params, double momentum) {
  return {momentum, params.zeros_like(), 0};
}

double cosine_lr(std::size_t t, std::size_t total, double lr0, double lr_min) {
  if (total == 0) throw ArgumentError("cosine_lr: total steps must be >= 1");
  if (t > total) throw ArgumentError("cosine_lr: step beyond schedule");
  const double frac = static_cast<double>(t) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

void sgd_step(ModelParams& params, const ModelParams& grads, OptState& opt, double lr,
              const ParamMask& mask) {
  if (grads.encoder.size() != params.encoder.size() || grads.projector.size() != params.projector.size() ||
      opt.buffers.encoder.size() != params.encoder.size() ||
      opt.buffers.projector.size() != params.projector.size() ||
      mask.encoder.size() != params.encoder.size() || mask.projector.size() != params.projector.size()) {
    throw ContractError("sgd_step: parameter, gradient, buffer and mask layouts differ");
  }
  auto update = [&](DenseLayer& p, const DenseLayer& g, DenseLayer& buf) {
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
        g.bias.size() != p.bias.size() || buf.weight.rows() != p.weight.rows() ||
        buf.weight.cols() != p.weight.cols() || buf.bias.size() != p.bias.size()) {
      throw ContractError("sgd_step: incongruent layer shapes");
    }
    auto step = [&](std::span<double> w, std::span<const double> gw, std::span<double> bw) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        bw[i] = opt.momentum * bw[i] + gw[i];
        w[i] -= lr * bw[i];
      }
    };
    step(p.weight.data(), g.weight.data(), buf.weight.data());
    step(p.bias, g.bias, buf.bias);
  };
  for (std::size_t i = 0; i < params.encoder.size(); ++i) {
    if (mask.encoder[i]) update(params.encoder[i], grads.encoder[i], opt.buffers.encoder[i]);
  }
  for (std::size_t i = 0; i < params.projector.size(); ++i) {
    if (mask.projector[i]) update(params.projector[i], grads.projector[i], opt.buffers.projector[i]);
  }
  if (mask.head) update(params.head, grads.head, opt.buffers.head);
  ++opt.step;
}

TrainResult pretrain(const TrainConfig& cfg, const PUDataset& data, ModelParams params) {
  return pretrain_view(cfg, training_view(data), std::move(params));
}

TrainResult pretrain(const TrainConfig& cfg, const PNUDataset& data, ModelParams params) {
  return pretrain_view(cfg, training_view(data), std::move(params));
}

TrainResult probe(const TrainConfig& cfg, ModelParams params, const PUDataset& data,
                  const BinaryDataset* test) {
  return transfer(cfg, std::move(params), data, test, Transfer::kProbe);
}

TrainResult finetune(const TrainConfig& cfg, ModelParams params, const PUDataset& data,
                     const BinaryDataset* test) {
  return transfer(cfg, std::move(params), data, test, Transfer::kFinetune);
}

Objective joint_objective(const Objective& ce, const Objective& cl, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("lambda must lie in [0, 1]");
  const auto a = ce.grads.flatten();
  const auto b = cl.grads.flatten();
  if (a.size() != b.size()) throw ContractError("joint objective gradients have different layouts");
  Objective out;
  out.value = lambda * ce.value + (1.0 - lambda) * cl.value;
  out.grads = ce.grads.zeros_like();
  std::size_t offset = 0;
  out.grads.for_each_block([&](std::span<double> block) {
    for (double& v : block) {
      v = lambda * a[offset] + (1.0 - lambda) * b[offset];
      ++offset;
    }
  });
  return out;
}

EvalResult evaluate_logits(std::span<const double> logits, std::span<const int> labels) {
  if (logits.size() != labels.size()) throw ArgumentError("logit/label length mismatch");
  if (logits.empty()) throw ArgumentError("evaluation set is empty");
  EvalResult r;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const bool predicted_positive = logits[i] >= 0.0;
    if (labels[i] == 1) {
      (predicted_positive ? r.true_positive : r.false_negative)++;
    } else {
      (predicted_positive ? r.false_positive : r.true_negative)++;
    }
  }
  const auto pos = r.true_positive + r.false_negative;
  const auto neg = r.true_negative + r.false_positive;
  r.accuracy = static_cast<double>(r.true_positive + r.true_negative) / static_cast<double>(logits.size());
  r.recall_positive = pos ? static_cast<double>(r.true_positive) / static_cast<double>(pos) : 0.0;
  r.recall_negative = neg ? static_cast<double>(r.true_negative) / static_cast<double>(neg) : 0.0;
  return r;
}

EvalResult evaluate(const ModelParams& params, const BinaryDataset& test) {
  const Matrix logits = forward(params, test.features, ForwardMode::kFinetune).output;
  return evaluate_logits(logits.data(), test.labels);
}

std::vector<AggregateRow> aggregate_seeds(std::span<const RunMetrics> runs) {
  if (runs.empty()) throw ArgumentError("nothing to aggregate");
  using Key = std::tuple<std::size_t, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> values;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::map<Key, double> seen;
    for (const auto& rec : runs[r].records()) {
      Key key{rec.epoch, rec.split, rec.metric};
      if (!seen.emplace(key, rec.value).second) {
        throw ArgumentError("run " + std::to_string(r) + " reports " + rec.split + "/" + rec.metric +
                            " twice at epoch " + std::to_string(rec.epoch));
      }
    }
    if (r == 0) {
      for (const auto& rec : runs[0].records()) order.emplace_back(rec.epoch, rec.split, rec.metric);
    } else if (seen.size() != order.size()) {
      throw ArgumentError("run " + std::to_string(r) + " reports a different set of metrics");
    }
    for (const auto& [key, v] : seen) {
      if (r > 0 && !values.contains(key)) {
        throw ArgumentError("run " + std::to_string(r) + " reports " + std::get<1>(key) + "/" +
                            std::get<2>(key) + " at epoch " + std::to_string(std::get<0>(key)) +
                            " which run 0 lacks");
      }
      values[key].push_back(v);
    }
  }
  std::vector<AggregateRow> rows;
  for (const auto& key : order) {
    const auto& v = values.at(key);
    AggregateRow row;
    std::tie(row.epoch, row.split, row.metric) = key;
    row.runs = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    row.mean = sum / static_cast<double>(v.size());
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - row.mean) * (x - row.mean);
      row.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pucl
