#pragma once

// Pipeline configuration: one flat `key = value` namespace whose defaults are the
// published training settings.

#include <iosfwd>
#include <string>
#include <vector>

#include "loger/encoder.hpp"
#include "loger/kv.hpp"
#include "loger/logic.hpp"
#include "loger/reasoner.hpp"
#include "loger/synth.hpp"

namespace loger {

struct MetricsConfig {
  std::size_t k = 10;
  std::size_t users = 50;
  std::size_t train_paths = 1000;
  std::size_t test_paths = 20;
};

struct PipelineConfig {
  std::string dataset = "dataset";
  std::string output = "checkpoints";
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  std::size_t rule_length = 3;
  std::uint64_t min_support = 10;
  EncoderConfig encoder;
  LogicConfig logic;
  ReasonerConfig reasoner;
  MetricsConfig metrics;
  SynthSpec synth;

  // Throws kConfig for unknown keys, malformed values or out-of-range settings.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void apply(const KeyValues& kv);
  void validate() const;
  // Every key in canonical order, one `key = value` line each.
  std::string dump() const;

  static PipelineConfig load(const std::string& path);
};

struct ConfigKey {
  std::string name;
  std::string help;
};

const std::vector<ConfigKey>& config_keys();

}  // namespace loger
