#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sigaug/eval.hpp"

namespace sigaug {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 2;
inline constexpr int kExitComponent = 3;
inline constexpr int kExitUsage = 64;

// Fully resolved command-line configuration. Precedence: built-in defaults,
// then the --config file, then explicit flags.
struct CliConfig {
  std::string subcommand;
  std::string output;
  bool quiet = false;
  // dataset, seed (as base_seed and train.seed) and all hyperparameters.
  ExperimentConfig experiment;
  std::string embeddings;  // augment input
  std::string params;      // train parameter blob
  std::string log;         // augment perturbation log
  SweepGrid grid;          // empty lists fall back to the single experiment value
  std::size_t sweep_cap = kDefaultSweepCap;

  friend bool operator==(const CliConfig&, const CliConfig&) = default;
};

// Keys in echo order with their current values.
std::vector<std::pair<std::string, std::string>> config_entries(const CliConfig& cfg);

// Throws ArgumentError on an unknown key or malformed value.
void set_config_value(CliConfig& cfg, std::string_view key, std::string_view value);

// One `key = value` line per entry.
void write_config(std::ostream& out, const CliConfig& cfg);
// Applies every entry of a `key = value` stream on top of the defaults.
CliConfig parse_config(std::istream& in);

// `args` excludes the program name. Returns the process exit code.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace sigaug
