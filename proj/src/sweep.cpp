#include "pucl/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "pucl/errors.hpp"

namespace pucl {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

RunMetrics single(const char* metric, double value, std::uint64_t seed) {
  RunMetrics m;
  m.append(0, "test", metric, value, seed);
  return m;
}

}  // namespace

const SweepSummary& SweepResult::at(LossKind loss, std::size_t n_labeled) const {
  for (const auto& s : summary) {
    if (s.loss == loss && s.n_labeled == n_labeled) return s;
  }
  throw ArgumentError("no sweep cell for " + std::string(to_string(loss)) + " at n_P = " +
                      std::to_string(n_labeled));
}

std::vector<std::size_t> architecture(std::size_t input_dim, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  return sizes;
}

SweepResult run_sweep(const SweepSpec& spec, const std::function<void(const SweepCell&)>& on_cell) {
  if (spec.seeds == 0 || spec.n_labeled.empty() || spec.losses.empty()) {
    throw ArgumentError("sweep needs at least one seed, n_P value and loss");
  }
  if (spec.encoder_hidden.empty()) throw ArgumentError("encoder needs at least one layer");
  for (LossKind loss : spec.losses) {
    if (loss == LossKind::kScl || loss == LossKind::kPuncePnu) {
      throw ArgumentError("sweep runs PU losses only (infonce, scl_pu, punce)");
    }
  }
  const auto encoder = architecture(spec.d, spec.encoder_hidden);
  std::vector<std::size_t> projector;
  if (!spec.projector_hidden.empty()) projector = architecture(encoder.back(), spec.projector_hidden);

  SweepResult result;
  for (std::size_t s = 0; s < spec.seeds; ++s) {
    const std::uint64_t seed = spec.base_seed + s;
    const BinaryDataset train =
        synth_gaussians(spec.n, spec.d, spec.separation, spec.pi_true, seed, streams::kSynthTrain);
    const BinaryDataset test =
        synth_gaussians(spec.n_test, spec.d, spec.separation, spec.pi_true, seed, streams::kSynthTest);
    for (std::size_t n_p : spec.n_labeled) {
      const PUDataset pu = make_pu(train, n_p, seed);
      for (LossKind loss : spec.losses) {
        TrainConfig cfg = spec.train;
        cfg.loss = loss;
        cfg.seed = seed;
        TrainResult pre = pretrain(cfg, pu, init_mlp(encoder, projector, seed));
        TrainResult lp = probe(cfg, pre.params, pu);
        SweepCell cell{loss, n_p, seed, evaluate(lp.params, test).accuracy, std::nullopt};
        if (spec.with_finetune) {
          TrainResult ft = finetune(cfg, pre.params, pu);
          cell.ft_accuracy = evaluate(ft.params, test).accuracy;
        }
        result.cells.push_back(cell);
        if (on_cell) on_cell(cell);
      }
    }
  }

  for (std::size_t n_p : spec.n_labeled) {
    for (LossKind loss : spec.losses) {
      std::vector<RunMetrics> lp_runs, ft_runs;
      for (const auto& c : result.cells) {
        if (c.loss != loss || c.n_labeled != n_p) continue;
        lp_runs.push_back(single("lp_accuracy", c.lp_accuracy, c.seed));
        if (c.ft_accuracy) ft_runs.push_back(single("ft_accuracy", *c.ft_accuracy, c.seed));
      }
      SweepSummary sum{loss, n_p, 0.0, std::nullopt, std::nullopt, std::nullopt};
      const auto lp = aggregate_seeds(lp_runs).front();
      sum.lp_mean = lp.mean;
      sum.lp_std = lp.stddev;
      if (!ft_runs.empty()) {
        const auto ft = aggregate_seeds(ft_runs).front();
        sum.ft_mean = ft.mean;
        sum.ft_std = ft.stddev;
      }
      result.summary.push_back(sum);
    }
  }
  return result;
}

void write_sweep_table(const SweepResult& result, const std::filesystem::path& path) {
  std::vector<std::size_t> rows;
  std::vector<LossKind> cols;
  for (const auto& s : result.summary) {
    if (std::find(rows.begin(), rows.end(), s.n_labeled) == rows.end()) rows.push_back(s.n_labeled);
    if (std::find(cols.begin(), cols.end(), s.loss) == cols.end()) cols.push_back(s.loss);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "n_P";
  for (LossKind c : cols) out << ',' << to_string(c);
  out << '\n';
  for (std::size_t r : rows) {
    out << r;
    for (LossKind c : cols) {
      const auto& s = result.at(c, r);
      out << ',' << fmt(100.0 * s.lp_mean, "%.2f");
      if (s.lp_std) out << "±" << fmt(100.0 * *s.lp_std, "%.2f");
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_sweep_cells(const SweepResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "loss,n_P,seed,lp_accuracy,ft_accuracy\n";
  for (const auto& c : result.cells) {
    out << to_string(c.loss) << ',' << c.n_labeled << ',' << c.seed << ',' << fmt(c.lp_accuracy) << ','
        << (c.ft_accuracy ? fmt(*c.ft_accuracy) : std::string()) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace pucl
