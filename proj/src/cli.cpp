#include "pucl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "pucl/errors.hpp"

namespace pucl {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
    throw UsageError(key, "expected a real number, got '" + v + "'");
  }
  return d;
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw UsageError(key, "expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::out_of_range&) {
    throw UsageError(key, "integer out of range");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_counts(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) out.push_back(to_count(key, item));
  return out;
}

struct KeyDef {
  const char* name;
  const char* fallback;
  std::function<void(const std::string& key, const std::string& value)> check;
};

void any(const std::string&, const std::string&) {}
void real(const std::string& k, const std::string& v) { to_real(k, v); }
void count(const std::string& k, const std::string& v) { to_count(k, v); }
void flag(const std::string& k, const std::string& v) { to_bool(k, v); }
void counts(const std::string& k, const std::string& v) { to_counts(k, v); }
void optional_real(const std::string& k, const std::string& v) {
  if (!v.empty()) to_real(k, v);
}
void positive_real(const std::string& k, const std::string& v) {
  if (!(to_real(k, v) > 0.0)) throw UsageError(k, "must be > 0");
}
void unit_interval(const std::string& k, const std::string& v) {
  const double d = to_real(k, v);
  if (!(d >= 0.0 && d <= 1.0)) throw UsageError(k, "must lie in [0, 1]");
}
void loss_name(const std::string& k, const std::string& v) {
  try {
    parse_loss_kind(v);
  } catch (const ArgumentError& e) {
    throw UsageError(k, e.what());
  }
}
void loss_names(const std::string& k, const std::string& v) {
  const auto items = split_list(v);
  if (items.empty()) throw UsageError(k, "needs at least one loss");
  for (const auto& item : items) loss_name(k, item);
}
void risk_name(const std::string& k, const std::string& v) {
  try {
    parse_risk_kind(v);
  } catch (const ArgumentError& e) {
    throw UsageError(k, e.what());
  }
}

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = {
      // data generation
      {"n", "2000", count},
      {"n_test", "2000", count},
      {"d", "10", count},
      {"sep", "6", real},
      {"pi", "0.5", unit_interval},
      // PU simulation and training
      {"n_labeled", "50", counts},
      {"loss", "punce", loss_name},
      {"risk", "nnpu", risk_name},
      {"tau", "0.5", positive_real},
      {"pi_override", "", optional_real},
      {"batch_size", "64", count},
      {"epochs", "100", count},
      {"probe_epochs", "50", count},
      {"lr0", "0.01", positive_real},
      {"lr_min", "0", real},
      {"momentum", "0.9", real},
      {"seed", "1", count},
      {"joint_lambda", "", optional_real},
      {"noise_sigma", "0.1", real},
      {"scale_lo", "0.9", real},
      {"scale_hi", "1.1", real},
      {"mask_prob", "0.05", real},
      {"normalize", "true", flag},
      {"encoder_hidden", "64,64,32", counts},
      {"projector_hidden", "16", counts},
      // sweep
      {"losses", "infonce,scl_pu,punce", loss_names},
      {"seeds", "5", count},
      {"with_finetune", "false", flag},
      // paths; empty means derived from out_dir
      {"out_dir", "", any},
      {"train_data", "", any},
      {"test_data", "", any},
      {"pu_data", "", any},
      {"checkpoint", "", any},
  };
  return defs;
}

const KeyDef* find_key(const std::string& name) {
  for (const auto& k : key_defs()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

void set_value(std::map<std::string, std::string>& values, std::string key, std::string value) {
  std::replace(key.begin(), key.end(), '-', '_');
  const KeyDef* def = find_key(key);
  if (def == nullptr) throw UsageError(key, "unknown configuration key");
  value = trim(value);
  def->check(key, value);
  values[key] = value;
}

TrainConfig build_train_config(const std::map<std::string, std::string>& v) {
  TrainConfig t;
  t.loss = parse_loss_kind(v.at("loss"));
  t.risk = parse_risk_kind(v.at("risk"));
  t.tau = to_real("tau", v.at("tau"));
  if (!v.at("pi_override").empty()) t.pi_override = to_real("pi_override", v.at("pi_override"));
  t.batch_size = to_count("batch_size", v.at("batch_size"));
  t.epochs = to_count("epochs", v.at("epochs"));
  t.probe_epochs = to_count("probe_epochs", v.at("probe_epochs"));
  t.lr0 = to_real("lr0", v.at("lr0"));
  t.lr_min = to_real("lr_min", v.at("lr_min"));
  t.momentum = to_real("momentum", v.at("momentum"));
  t.seed = to_count("seed", v.at("seed"));
  if (!v.at("joint_lambda").empty()) t.joint_lambda = to_real("joint_lambda", v.at("joint_lambda"));
  t.augment.noise_sigma = to_real("noise_sigma", v.at("noise_sigma"));
  t.augment.scale_lo = to_real("scale_lo", v.at("scale_lo"));
  t.augment.scale_hi = to_real("scale_hi", v.at("scale_hi"));
  t.augment.mask_prob = to_real("mask_prob", v.at("mask_prob"));
  t.normalize = to_bool("normalize", v.at("normalize"));
  try {
    t.validate();
  } catch (const ArgumentError& e) {
    throw UsageError("", std::string("invalid configuration: ") + e.what());
  }
  return t;
}

// Reads back every artifact so that exit status 0 means "written and
// parseable".
void verify_checkpoint(const fs::path& p) { load_checkpoint(p); }
void verify_metrics(const fs::path& p) { read_metrics_csv(p); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw std::runtime_error(std::string("missing ") + what + ": " + p.string());
}

int cmd_gen_data(const CliConfig& c, std::ostream& out) {
  const auto n = to_count("n", c.get("n"));
  const auto n_test = to_count("n_test", c.get("n_test"));
  const auto d = to_count("d", c.get("d"));
  const double sep = to_real("sep", c.get("sep"));
  const double pi = to_real("pi", c.get("pi"));
  const fs::path train_path = c.path_or("train_data", "train.csv");
  const fs::path test_path = c.path_or("test_data", "test.csv");
  ensure_dir(c.out_dir());
  const auto train = synth_gaussians(n, d, sep, pi, c.train.seed, streams::kSynthTrain);
  write_csv(train, train_path);
  load_csv_dataset(train_path).validate();
  if (n_test > 0) {
    const auto test = synth_gaussians(n_test, d, sep, pi, c.train.seed, streams::kSynthTest);
    write_csv(test, test_path);
    load_csv_dataset(test_path).validate();
  }
  write_manifest(c, "gen-data", c.out_dir() / "gen-data_manifest.txt");
  out << "wrote " << train_path.string() << " (" << n << " x " << d << ")";
  if (n_test > 0) out << " and " << test_path.string();
  out << '\n';
  return 0;
}

std::size_t single_n_labeled(const CliConfig& c) {
  const auto v = c.n_labeled();
  if (v.size() != 1) throw UsageError("n_labeled", "expects a single value for this subcommand");
  return v.front();
}

int cmd_pretrain(const CliConfig& c, std::ostream& out) {
  const fs::path train_path = c.path_or("train_data", "train.csv");
  require_file(train_path, "training data");
  const BinaryDataset ds = load_csv_dataset(train_path);
  ds.validate();
  const fs::path pu_path = c.path_or("pu_data", "pu_train.csv");
  ensure_dir(c.out_dir());
  const auto params = init_mlp(c.encoder_sizes(ds.features.cols()),
                               c.projector_sizes(c.encoder_sizes(ds.features.cols()).back()), c.train.seed);
  // The PU split always goes to pu_data for the transfer stage. PNU losses
  // pretrain on a separate PNU split.
  const PUDataset pu = make_pu(ds, single_n_labeled(c), c.train.seed);
  write_csv(pu, pu_path);
  TrainResult res;
  if (c.train.loss == LossKind::kPuncePnu || c.train.loss == LossKind::kScl) {
    const std::size_t n_l = c.train.loss == LossKind::kScl ? ds.size() : single_n_labeled(c);
    const PNUDataset pnu = make_pnu(ds, n_l, c.train.seed);
    write_csv(pnu, c.out_dir() / "pnu_train.csv");
    res = pretrain(c.train, pnu, params);
  } else {
    res = pretrain(c.train, pu, params);
  }
  const fs::path ckpt = c.out_dir() / "pretrain.ckpt";
  const fs::path metrics = c.out_dir() / "pretrain_metrics.csv";
  save_checkpoint(res.params, ckpt);
  write_metrics_csv(res.metrics, metrics);
  write_manifest(c, "pretrain", c.out_dir() / "pretrain_manifest.txt");
  verify_checkpoint(ckpt);
  verify_metrics(metrics);
  out << "pretrained " << to_string(c.train.loss) << " for " << c.train.epochs << " epochs";
  if (auto v = res.metrics.last("train", "contrastive_loss")) out << ", final loss " << fmt(*v);
  out << "\nwrote " << ckpt.string() << '\n';
  return 0;
}

int cmd_transfer(const CliConfig& c, std::ostream& out, bool full) {
  const fs::path pu_path = c.path_or("pu_data", "pu_train.csv");
  const fs::path ckpt_in = c.path_or("checkpoint", "pretrain.ckpt");
  require_file(pu_path, "PU training data");
  require_file(ckpt_in, "checkpoint");
  const PUDataset pu = load_pu_csv(pu_path);
  ModelParams params = load_checkpoint(ckpt_in);
  const fs::path test_path = c.path_or("test_data", "test.csv");
  std::optional<BinaryDataset> test;
  if (fs::exists(test_path)) test = load_csv_dataset(test_path);
  const BinaryDataset* test_ptr = test ? &*test : nullptr;
  TrainResult res = full ? finetune(c.train, std::move(params), pu, test_ptr)
                         : probe(c.train, std::move(params), pu, test_ptr);
  const std::string name = full ? "finetune" : "probe";
  ensure_dir(c.out_dir());
  const fs::path ckpt = c.out_dir() / (name + ".ckpt");
  const fs::path metrics = c.out_dir() / (name + "_metrics.csv");
  save_checkpoint(res.params, ckpt);
  write_metrics_csv(res.metrics, metrics);
  write_manifest(c, name, c.out_dir() / (name + "_manifest.txt"));
  verify_checkpoint(ckpt);
  verify_metrics(metrics);
  out << name << " with " << to_string(c.train.risk) << " risk for " << c.train.probe_epochs << " epochs";
  if (auto v = res.metrics.last("test", "accuracy")) out << ", test accuracy " << fmt(*v);
  // Spread of per-epoch test accuracy, a rough measure of training stability.
  std::vector<double> acc;
  for (const auto& r : res.metrics.records())
    if (r.split == "test" && r.metric == "accuracy") acc.push_back(r.value);
  if (acc.size() > 1) {
    double mean = 0.0, ss = 0.0;
    for (double a : acc) mean += a;
    mean /= static_cast<double>(acc.size());
    for (double a : acc) ss += (a - mean) * (a - mean);
    out << ", across-epoch std " << fmt(std::sqrt(ss / static_cast<double>(acc.size() - 1)));
  }
  out << "\nwrote " << ckpt.string() << '\n';
  return 0;
}

int cmd_eval(const CliConfig& c, std::ostream& out) {
  const fs::path ckpt_in = c.path_or("checkpoint", "probe.ckpt");
  const fs::path test_path = c.path_or("test_data", "test.csv");
  require_file(ckpt_in, "checkpoint");
  require_file(test_path, "test data");
  const ModelParams params = load_checkpoint(ckpt_in);
  const BinaryDataset test = load_csv_dataset(test_path);
  const EvalResult r = evaluate(params, test);
  RunMetrics m;
  const std::uint64_t seed = c.train.seed;
  m.append(0, "test", "accuracy", r.accuracy, seed);
  m.append(0, "test", "recall_positive", r.recall_positive, seed);
  m.append(0, "test", "recall_negative", r.recall_negative, seed);
  m.append(0, "test", "true_positive", static_cast<double>(r.true_positive), seed);
  m.append(0, "test", "false_positive", static_cast<double>(r.false_positive), seed);
  m.append(0, "test", "true_negative", static_cast<double>(r.true_negative), seed);
  m.append(0, "test", "false_negative", static_cast<double>(r.false_negative), seed);
  ensure_dir(c.out_dir());
  const fs::path metrics = c.out_dir() / "eval_metrics.csv";
  write_metrics_csv(m, metrics);
  write_manifest(c, "eval", c.out_dir() / "eval_manifest.txt");
  verify_metrics(metrics);
  out << "accuracy " << fmt(r.accuracy) << " (tp " << r.true_positive << ", fp " << r.false_positive
      << ", tn " << r.true_negative << ", fn " << r.false_negative << ")\n";
  return 0;
}

int cmd_sweep(const CliConfig& c, std::ostream& out) {
  const SweepSpec spec = c.sweep_spec();
  ensure_dir(c.out_dir());
  const SweepResult result = run_sweep(spec, [&](const SweepCell& cell) {
    out << to_string(cell.loss) << " n_P=" << cell.n_labeled << " seed=" << cell.seed
        << " lp=" << fmt(cell.lp_accuracy);
    if (cell.ft_accuracy) out << " ft=" << fmt(*cell.ft_accuracy);
    out << '\n';
  });
  write_sweep_table(result, c.out_dir() / "sweep_table.csv");
  write_sweep_cells(result, c.out_dir() / "sweep_cells.csv");
  write_manifest(c, "sweep", c.out_dir() / "sweep_manifest.txt");
  out << "wrote " << (c.out_dir() / "sweep_table.csv").string() << '\n';
  return 0;
}

void usage(std::ostream& os) {
  os << "usage: pucl <gen-data|pretrain|probe|finetune|eval|sweep> [--config FILE] [--key value ...]\n"
        "keys:";
  for (const auto& k : key_defs()) os << ' ' << k.name;
  os << "\n";
}

}  // namespace

const std::string& CliConfig::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw UsageError(key, "unknown configuration key");
  return it->second;
}

fs::path CliConfig::out_dir() const {
  const std::string& v = get("out_dir");
  return v.empty() ? fs::path(".") : fs::path(v);
}

fs::path CliConfig::path_or(const std::string& key, const std::string& fallback) const {
  const std::string& v = get(key);
  return v.empty() ? out_dir() / fallback : fs::path(v);
}

std::vector<std::size_t> CliConfig::n_labeled() const { return to_counts("n_labeled", get("n_labeled")); }

std::vector<std::size_t> CliConfig::encoder_sizes(std::size_t input_dim) const {
  const auto hidden = to_counts("encoder_hidden", get("encoder_hidden"));
  if (hidden.empty()) throw UsageError("encoder_hidden", "needs at least one layer");
  return architecture(input_dim, hidden);
}

std::vector<std::size_t> CliConfig::projector_sizes(std::size_t feature_dim) const {
  const auto hidden = to_counts("projector_hidden", get("projector_hidden"));
  if (hidden.empty()) return {};
  return architecture(feature_dim, hidden);
}

SweepSpec CliConfig::sweep_spec() const {
  SweepSpec s;
  s.n = to_count("n", get("n"));
  s.n_test = to_count("n_test", get("n_test"));
  s.d = to_count("d", get("d"));
  s.separation = to_real("sep", get("sep"));
  s.pi_true = to_real("pi", get("pi"));
  s.n_labeled = n_labeled();
  s.losses.clear();
  for (const auto& name : split_list(get("losses"))) s.losses.push_back(parse_loss_kind(name));
  s.seeds = to_count("seeds", get("seeds"));
  s.base_seed = train.seed;
  s.encoder_hidden = to_counts("encoder_hidden", get("encoder_hidden"));
  s.projector_hidden = to_counts("projector_hidden", get("projector_hidden"));
  s.train = train;
  s.with_finetune = to_bool("with_finetune", get("with_finetune"));
  return s;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& k : key_defs()) keys.emplace_back(k.name);
  return keys;
}

CliConfig parse_config(const std::optional<fs::path>& file, std::span<const std::string> flags) {
  CliConfig cfg;
  for (const auto& k : key_defs()) cfg.values[k.name] = k.fallback;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    cfg.values["out_dir"] = env;
  }

  if (file) {
    std::ifstream in(*file);
    if (!in) throw UsageError("config", "cannot open " + file->string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw UsageError("config", file->string() + ":" + std::to_string(lineno) + ": expected key = value");
      }
      set_value(cfg.values, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
  }

  for (std::size_t i = 0; i < flags.size(); ++i) {
    const std::string& arg = flags[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) throw UsageError(arg, "expected --key value");
    std::string key = arg.substr(2);
    std::string value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else {
      if (i + 1 >= flags.size()) throw UsageError(key, "missing value");
      value = flags[++i];
    }
    set_value(cfg.values, key, value);
  }
  cfg.train = build_train_config(cfg.values);
  return cfg;
}

void write_manifest(const CliConfig& cfg, const std::string& subcommand, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# pucl " << subcommand << " effective configuration\n";
  for (const auto& [k, v] : cfg.values) out << k << " = " << v << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    usage(args.empty() ? err : out);
    return args.empty() ? 2 : 0;
  }
  const std::string sub = args[0];
  static const std::vector<std::string> known{"gen-data", "pretrain", "probe", "finetune", "eval", "sweep"};
  if (std::find(known.begin(), known.end(), sub) == known.end()) {
    err << "pucl: unknown subcommand '" << sub << "'\n";
    usage(err);
    return 2;
  }
  try {
    std::optional<fs::path> file;
    std::vector<std::string> flags;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == "--config") {
        if (i + 1 >= args.size()) throw UsageError("config", "missing value");
        file = args[++i];
      } else if (args[i].rfind("--config=", 0) == 0) {
        file = args[i].substr(9);
      } else {
        flags.push_back(args[i]);
      }
    }
    const CliConfig cfg = parse_config(file, flags);
    if (sub == "gen-data") return cmd_gen_data(cfg, out);
    if (sub == "pretrain") return cmd_pretrain(cfg, out);
    if (sub == "probe") return cmd_transfer(cfg, out, false);
    if (sub == "finetune") return cmd_transfer(cfg, out, true);
    if (sub == "eval") return cmd_eval(cfg, out);
    return cmd_sweep(cfg, out);
  } catch (const UsageError& e) {
    err << "pucl " << sub << ": usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "pucl " << sub << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pucl
