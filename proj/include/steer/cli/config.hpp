#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace steer::cli {

enum class Command { Denoise, Reconstruct, Mlem, Assisted, Generalize, Phantom, Basis, Audit, Metrics };

std::string to_string(Command command);
Command parse_command(const std::string& text);

/// Every experiment setting. Defaults are the documented built-ins; `auto`
/// values are replaced by `resolve` so the echoed configuration is explicit.
struct ExperimentConfig {
  std::optional<Command> command;
  int order = 8;
  std::size_t width = 8;
  std::size_t epochs = 2000;
  std::uint64_t seed = 0;
  /// Replications run seeds seed .. seed + seeds - 1.
  std::size_t seeds = 1;
  std::size_t size = 64;
  double pitch = 0.8;
  double counts = 100.0;
  /// 0 means one angle per image row.
  std::size_t angles = 0;
  std::size_t mlem_iters = 2;
  /// auto | brain | derenzo
  std::string phantom = "auto";
  /// both | scnn | cnn
  std::string network = "both";
  double lr = 1e-3;
  std::size_t checkpoint_every = 100;
  std::size_t train_images = 10;
  std::size_t test_images = 4;
  int test_rotation = 1;
  std::string rep_in = "trivial";
  std::string rep_out = "trivial";
  int kernel = 3;
  /// auto | polar | cartesian
  std::string grid = "auto";
  int anti_alias = 1;
  std::filesystem::path input;
  std::filesystem::path reference;
  std::filesystem::path out = "out";
  bool csv = false;
  bool pgm = true;
};

/// Config keys in echo order.
const std::vector<std::string>& config_keys();

/// Parses `value` into the field named `key`. `where` prefixes error messages
/// (for example "config.txt:3" or "flag --epochs").
void set_value(ExperimentConfig& config, const std::string& key, const std::string& value, const std::string& where);
std::string get_value(const ExperimentConfig& config, const std::string& key);

/// Applies a `key = value` file to `config`. Blank lines and `#` comments are
/// ignored.
void apply_file(ExperimentConfig& config, const std::filesystem::path& path);
void apply_text(ExperimentConfig& config, const std::string& text, const std::string& source);

/// Built-in defaults < config file < flags. Flags are applied in the given order.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::pair<std::string, std::string>>& flags);

/// Replaces `auto` values and checks cross-field consistency. Throws
/// `ErrorKind::Geometry` or `ErrorKind::InvalidArgument`.
ExperimentConfig resolve(ExperimentConfig config);

/// `key = value` lines for every key, in `config_keys` order.
std::string format_config(const ExperimentConfig& config);

}  // namespace steer::cli
