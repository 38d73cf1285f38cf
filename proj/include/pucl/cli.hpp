#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pucl/sweep.hpp"
#include "pucl/train.hpp"

namespace pucl {

inline constexpr const char* kOutDirEnv = "PUCL_OUT_DIR";

class UsageError : public std::runtime_error {
 public:
  UsageError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : "'" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Effective flat configuration: documented defaults, then the config file,
// then command-line flags.
struct CliConfig {
  std::map<std::string, std::string> values;
  TrainConfig train;

  const std::string& get(const std::string& key) const;
  std::filesystem::path out_dir() const;
  // A path key, or out_dir / fallback when the key is empty.
  std::filesystem::path path_or(const std::string& key, const std::string& fallback) const;
  std::vector<std::size_t> n_labeled() const;
  std::vector<std::size_t> encoder_sizes(std::size_t input_dim) const;
  std::vector<std::size_t> projector_sizes(std::size_t feature_dim) const;
  SweepSpec sweep_spec() const;
};

// file: `key = value` lines, `#` comments. flags: `--key value` or
// `--key=value`; dashes in keys read as underscores.
CliConfig parse_config(const std::optional<std::filesystem::path>& file,
                       std::span<const std::string> flags);

std::vector<std::string> config_keys();

void write_manifest(const CliConfig& cfg, const std::string& subcommand,
                    const std::filesystem::path& path);

// args excludes the program name: args[0] is the subcommand.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace pucl
