#include "pucl/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "pucl/errors.hpp"

namespace pucl {

namespace {

std::size_t count_positive(std::span<const int> labels) {
  std::size_t n = 0;
  for (int y : labels) n += (y == 1);
  return n;
}

void check_labels(std::span<const int> labels, const char* what) {
  for (int y : labels) {
    if (y != 1 && y != -1) throw ArgumentError(std::string(what) + " must be +1 or -1");
  }
}

// p(y=+1 | unlabeled); falls back to the overall positive rate when
// every sample is labeled.
ClassPrior unlabeled_prior(std::span<const int> hidden, std::span<const int> labeled_mask) {
  std::size_t unlabeled = 0, unlabeled_pos = 0;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (labeled_mask[i] == 0) {
      ++unlabeled;
      unlabeled_pos += (hidden[i] == 1);
    }
  }
  if (unlabeled == 0) {
    return ClassPrior(hidden.empty() ? 0.0
                                     : static_cast<double>(count_positive(hidden)) /
                                           static_cast<double>(hidden.size()));
  }
  return ClassPrior(static_cast<double>(unlabeled_pos) / static_cast<double>(unlabeled));
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_real(std::string_view s, double& out) {
  std::string buf(trim(s));
  if (buf.empty()) return false;
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
  std::string buf(trim(s));
  if (buf.empty()) return false;
  if (buf.front() == '+') buf.erase(0, 1);
  char* end = nullptr;
  long v = std::strtol(buf.c_str(), &end, 10);
  if (end != buf.c_str() + buf.size()) return false;
  out = static_cast<int>(v);
  return true;
}

struct CsvTable {
  Matrix features;
  std::vector<int> y;
  std::vector<int> s;
  bool has_s = false;
};

CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  auto header = split_commas(trim(line));
  CsvTable t;
  std::size_t ncols = header.size();
  if (ncols >= 2 && trim(header.back()) == "s") {
    t.has_s = true;
  }
  std::size_t y_col = t.has_s ? ncols - 2 : ncols - 1;
  if (ncols < 2 || trim(header[y_col]) != "y") {
    throw ParseError(1, "header must be feature_0,...,feature_{d-1},y[,s]");
  }
  const std::size_t d = y_col;
  for (std::size_t c = 0; c < d; ++c) {
    if (trim(header[c]) != "feature_" + std::to_string(c)) {
      throw ParseError(1, "expected column feature_" + std::to_string(c));
    }
  }
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_commas(trim(line));
    if (cells.size() != ncols) {
      throw ParseError(lineno, "expected " + std::to_string(ncols) + " fields, found " +
                                   std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < d; ++c) {
      double v;
      if (!parse_real(cells[c], v)) {
        throw ParseError(lineno, "bad real in column feature_" + std::to_string(c));
      }
      values.push_back(v);
    }
    int y;
    if (!parse_int(cells[y_col], y) || (y != 1 && y != -1)) {
      throw ParseError(lineno, "label must be +1 or -1, got '" + std::string(trim(cells[y_col])) + "'");
    }
    t.y.push_back(y);
    if (t.has_s) {
      int s;
      if (!parse_int(cells[ncols - 1], s) || (s != 0 && s != 1)) {
        throw ParseError(lineno, "indicator s must be 0 or 1");
      }
      t.s.push_back(s);
    }
  }
  t.features = Matrix(t.y.size(), d, std::move(values));
  return t;
}

void write_table(const std::filesystem::path& path, const Matrix& x, std::span<const int> y,
                 std::span<const int> s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t c = 0; c < x.cols(); ++c) out << "feature_" << c << ',';
  out << 'y';
  if (!s.empty()) out << ",s";
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", x(r, c));
      out << buf << ',';
    }
    out << y[r];
    if (!s.empty()) out << ',' << s[r];
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

ClassPrior::ClassPrior(double pi) : pi_(pi) {
  if (!(pi >= 0.0 && pi <= 1.0)) throw ArgumentError("class prior must lie in [0, 1]");
}

ClassPrior exact_pi(std::size_t p_star, std::size_t n_star, std::size_t n_labeled) {
  if (n_labeled > p_star) throw ArgumentError("exact_pi: n_P exceeds the number of positives");
  if (p_star + n_star - n_labeled == 0) throw ArgumentError("exact_pi: no unlabeled samples");
  return ClassPrior(static_cast<double>(p_star - n_labeled) /
                    static_cast<double>(p_star + n_star - n_labeled));
}

std::size_t BinaryDataset::count_positive() const noexcept { return pucl::count_positive(labels); }

void BinaryDataset::validate() const {
  if (features.rows() != labels.size()) throw ArgumentError("feature rows != label count");
  check_labels(labels, "labels");
  if (!features.all_finite()) throw ArgumentError("non-finite feature");
  const std::size_t pos = count_positive();
  if (pos == 0 || pos == labels.size()) throw ArgumentError("dataset must contain both classes");
}

PUDataset::PUDataset(Matrix features, std::vector<int> indicator, std::vector<int> hidden_labels,
                     ClassPrior prior)
    : features_(std::move(features)),
      indicator_(std::move(indicator)),
      hidden_labels_(std::move(hidden_labels)),
      prior_(prior) {
  if (features_.rows() != indicator_.size() || indicator_.size() != hidden_labels_.size()) {
    throw ArgumentError("PU dataset column lengths disagree");
  }
  check_labels(hidden_labels_, "hidden labels");
  for (std::size_t i = 0; i < indicator_.size(); ++i) {
    if (indicator_[i] != 0 && indicator_[i] != 1) throw ArgumentError("indicator must be 0 or 1");
    if (indicator_[i] == 1 && hidden_labels_[i] != 1) {
      throw ArgumentError("labeled sample " + std::to_string(i) + " is not positive");
    }
  }
}

std::size_t PUDataset::labeled_count() const noexcept {
  std::size_t n = 0;
  for (int s : indicator_) n += s;
  return n;
}

PNUDataset::PNUDataset(Matrix features, std::vector<int> observed_labels,
                       std::vector<int> hidden_labels, ClassPrior prior)
    : features_(std::move(features)),
      observed_(std::move(observed_labels)),
      hidden_labels_(std::move(hidden_labels)),
      prior_(prior) {
  if (features_.rows() != observed_.size() || observed_.size() != hidden_labels_.size()) {
    throw ArgumentError("PNU dataset column lengths disagree");
  }
  check_labels(hidden_labels_, "hidden labels");
  for (std::size_t i = 0; i < observed_.size(); ++i) {
    if (observed_[i] != 0 && observed_[i] != hidden_labels_[i]) {
      throw ArgumentError("observed label " + std::to_string(i) + " disagrees with ground truth");
    }
  }
}

std::size_t PNUDataset::labeled_count() const noexcept {
  std::size_t n = 0;
  for (int y : observed_) n += (y != 0);
  return n;
}

TrainingView training_view(const PUDataset& ds) {
  TrainingView v;
  v.features = &ds.features();
  v.indicator.assign(ds.indicator().begin(), ds.indicator().end());
  v.observed.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) v.observed[i] = v.indicator[i] == 1 ? 1 : 0;
  v.prior = ds.prior();
  v.kind = Supervision::kPU;
  return v;
}

TrainingView training_view(const PNUDataset& ds) {
  TrainingView v;
  v.features = &ds.features();
  v.observed.assign(ds.observed_labels().begin(), ds.observed_labels().end());
  v.indicator.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) v.indicator[i] = v.observed[i] != 0 ? 1 : 0;
  v.prior = ds.prior();
  v.kind = Supervision::kPNU;
  return v;
}

void AugmentConfig::validate() const {
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) throw ArgumentError("noise_sigma must be >= 0");
  if (!std::isfinite(scale_lo) || !std::isfinite(scale_hi) || scale_lo > scale_hi) {
    throw ArgumentError("scale range must satisfy lo <= hi");
  }
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw ArgumentError("mask_prob must lie in [0, 1)");
}

void augment_row(std::span<double> row, const AugmentConfig& cfg, RngStream& rng) {
  if (cfg.noise_sigma > 0.0) {
    for (double& v : row) v += cfg.noise_sigma * rng.normal();
  }
  if (cfg.scale_lo != 1.0 || cfg.scale_hi != 1.0) {
    const double factor = cfg.scale_lo + (cfg.scale_hi - cfg.scale_lo) * rng.uniform();
    for (double& v : row) v *= factor;
  }
  if (cfg.mask_prob > 0.0) {
    for (double& v : row) {
      if (rng.uniform() < cfg.mask_prob) v = 0.0;
    }
  }
}

MultiViewBatch make_multiview_batch(const TrainingView& view, std::span<const std::size_t> sources,
                                    const AugmentConfig& cfg, RngStream& rng) {
  if (sources.empty()) throw ArgumentError("multi-view batch needs at least one source sample");
  cfg.validate();
  const Matrix& x = *view.features;
  const std::size_t b = sources.size();
  MultiViewBatch batch;
  batch.inputs = Matrix(2 * b, x.cols());
  batch.pair_index.resize(2 * b);
  batch.indicator.resize(2 * b);
  batch.labels.resize(2 * b);
  batch.source_index.resize(2 * b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t src = sources[i];
    if (src >= view.size()) throw ArgumentError("source index out of range");
    for (std::size_t v = 0; v < 2; ++v) {
      const std::size_t idx = 2 * i + v;
      auto row = batch.inputs.row(idx);
      auto in = x.row(src);
      std::copy(in.begin(), in.end(), row.begin());
      augment_row(row, cfg, rng);
      batch.pair_index[idx] = 2 * i + (1 - v);
      batch.indicator[idx] = view.indicator[src];
      batch.labels[idx] = view.observed[src];
      batch.source_index[idx] = src;
    }
  }
  return batch;
}

BinaryDataset synth_gaussians(std::size_t n, std::size_t d, double separation, double pi_true,
                              std::uint64_t seed, std::uint64_t stream) {
  if (n < 2 || d < 1) throw ArgumentError("synth_gaussians needs n >= 2 and d >= 1");
  if (!(pi_true > 0.0 && pi_true < 1.0)) throw ArgumentError("pi_true must lie in (0, 1)");
  if (!std::isfinite(separation) || separation < 0.0) throw ArgumentError("separation must be >= 0");
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * pi_true));
  if (n_pos == 0 || n_pos == n) throw ArgumentError("pi_true leaves one class empty");

  RngStream rng(seed, stream);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i < n_pos ? 1 : -1;
  const auto order = random_permutation(n, rng);

  BinaryDataset ds;
  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  const double half = separation / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[order[i]];
    ds.labels[i] = y;
    auto row = ds.features.row(i);
    for (double& v : row) v = rng.normal();
    row[0] += y * half;
  }
  return ds;
}

PUDataset make_pu(const BinaryDataset& ds, std::size_t n_labeled, std::uint64_t seed) {
  ds.validate();
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] == 1) positives.push_back(i);
  }
  if (n_labeled > positives.size()) {
    throw ArgumentError("n_P = " + std::to_string(n_labeled) + " exceeds positive count " +
                        std::to_string(positives.size()));
  }
  RngStream rng(seed, streams::kMakePU);
  const auto chosen = sample_without_replacement(positives.size(), n_labeled, rng);
  std::vector<int> s(ds.size(), 0);
  for (std::size_t k : chosen) s[positives[k]] = 1;
  const std::size_t p_star = positives.size();
  return PUDataset(ds.features, std::move(s), ds.labels,
                   exact_pi(p_star, ds.size() - p_star, n_labeled));
}

PNUDataset make_pnu(const BinaryDataset& ds, std::size_t n_labeled, std::uint64_t seed) {
  ds.validate();
  if (n_labeled > ds.size()) throw ArgumentError("n_l exceeds dataset size");
  RngStream rng(seed, streams::kMakePNU);
  const auto chosen = sample_without_replacement(ds.size(), n_labeled, rng);
  std::vector<int> observed(ds.size(), 0);
  for (std::size_t k : chosen) observed[k] = ds.labels[k];
  ClassPrior prior = unlabeled_prior(ds.labels, observed);
  return PNUDataset(ds.features, std::move(observed), ds.labels, prior);
}

BinaryDataset load_csv_dataset(const std::filesystem::path& path) {
  CsvTable t = read_table(path);
  BinaryDataset ds{std::move(t.features), std::move(t.y)};
  if (ds.size() == 0) throw ParseError(1, "no data rows");
  return ds;
}

PUDataset load_pu_csv(const std::filesystem::path& path) {
  CsvTable t = read_table(path);
  if (!t.has_s) throw ParseError(1, "PU dataset requires an s column");
  const std::size_t p_star = count_positive(t.y);
  std::size_t n_labeled = 0;
  for (std::size_t i = 0; i < t.s.size(); ++i) {
    if (t.s[i] == 1 && t.y[i] != 1) throw ParseError(i + 2, "labeled sample must have y = +1");
    n_labeled += t.s[i];
  }
  ClassPrior prior = exact_pi(p_star, t.y.size() - p_star, n_labeled);
  return PUDataset(std::move(t.features), std::move(t.s), std::move(t.y), prior);
}

PNUDataset load_pnu_csv(const std::filesystem::path& path) {
  CsvTable t = read_table(path);
  if (!t.has_s) throw ParseError(1, "PNU dataset requires an s column");
  std::vector<int> observed(t.y.size());
  for (std::size_t i = 0; i < t.y.size(); ++i) observed[i] = t.s[i] ? t.y[i] : 0;
  ClassPrior prior = unlabeled_prior(t.y, t.s);
  return PNUDataset(std::move(t.features), std::move(observed), std::move(t.y), prior);
}

void write_csv(const BinaryDataset& ds, const std::filesystem::path& path) {
  write_table(path, ds.features, ds.labels, {});
}

void write_csv(const PUDataset& ds, const std::filesystem::path& path) {
  write_table(path, ds.features(), ds.hidden_labels(), ds.indicator());
}

void write_csv(const PNUDataset& ds, const std::filesystem::path& path) {
  std::vector<int> s(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) s[i] = ds.observed_labels()[i] != 0 ? 1 : 0;
  write_table(path, ds.features(), ds.hidden_labels(), s);
}

}  // namespace pucl
