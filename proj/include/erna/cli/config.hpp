// erna/cli/config.hpp

// Copyright 2026  The erna authors

// See ../../LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "erna/aligner/loss.hpp"
#include "erna/encoder/encoder.hpp"
#include "erna/error.hpp"
#include "erna/frontend/downsample.hpp"
#include "erna/frontend/synth.hpp"
#include "erna/lmfusion/lm.hpp"
#include "erna/regularizer/penalty.hpp"

// Run configuration as "key=value" text, one entry per line. '#' starts a
// comment. Serialization writes every key in a fixed order, so a config
// round-trips through text exactly.

namespace erna {

struct RunConfig {
  // Model
  std::size_t input_dim = 16;
  std::size_t vocab_size = 8;
  std::string downsample = "conv-stride{2}+pooling{2,4}-width{2,2}";
  std::size_t conv_channels = 4;
  std::size_t mu_count = 1;
  std::size_t lstm_layers = 4;
  std::size_t lstm_cells = 32;
  bool bidirectional = true;
  std::size_t projection_dim = 0;
  std::size_t row_conv_context = 4;
  std::size_t decoder_embed = 4;
  std::size_t decoder_cells = 4;
  bool feed_blanks = false;
  std::size_t lm_embed = 16;
  std::size_t lm_cells = 32;
  bool fusion = false;
  std::size_t lm_epochs = 20;
  std::size_t lm_batch_size = 8;
  double lm_learning_rate = 0.5;
  double init_range = 0.2;
  // Objective and decoding
  std::string loss_mode = "lattice-exact";
  double confidence_penalty = 0.0;
  std::size_t beam = 10;
  // Optimization
  std::uint64_t seed = 7;
  double learning_rate = 0.1;
  double momentum = 0.0;
  std::size_t lr_patience = 12;
  std::size_t batch_size = 1;
  std::size_t epochs = 150;
  /// Std-dev of Gaussian jitter added to training features, redrawn per epoch.
  double feature_noise = 0.5;
  /// Training utterances are time-stretched by a factor drawn from
  /// [1 - speed_perturb, 1 + speed_perturb] every epoch.
  double speed_perturb = 0.0;
  int precision = 64;
  // Data
  std::string vocab;
  std::size_t synth_train = 50;
  std::size_t synth_dev = 20;
  std::size_t synth_min_frames = 40;
  std::size_t synth_max_frames = 80;
  std::size_t synth_min_labels = 2;
  std::size_t synth_max_labels = 5;
  std::size_t synth_rate = 8;
  double synth_noise = 0.3;
  std::size_t synth_homophones = 0;
  double synth_grammar_skew = 0.0;

  LossMode mode() const { return parse_loss_mode(loss_mode); }
  PenaltyConfig penalty() const { return {confidence_penalty}; }
  LmTrainConfig lm_train() const { return {lm_epochs, lm_batch_size, lm_learning_rate, seed}; }

  EncoderConfig encoder() const {
    EncoderConfig e;
    e.input_dim = input_dim;
    e.downsample = parse_downsample_spec(downsample);
    e.conv_channels = conv_channels;
    e.mu_count = mu_count;
    e.lstm_layers = lstm_layers;
    e.lstm_cells = lstm_cells;
    e.bidirectional = bidirectional;
    e.projection_dim = projection_dim;
    e.row_conv_context = row_conv_context;
    return e;
  }

  SynthConfig synth() const {
    SynthConfig s;
    s.seed = seed;
    s.train_count = synth_train;
    s.dev_count = synth_dev;
    s.vocab_size = vocab_size;
    s.min_frames = synth_min_frames;
    s.max_frames = synth_max_frames;
    s.min_labels = synth_min_labels;
    s.max_labels = synth_max_labels;
    s.feature_dim = input_dim;
    s.rate_denominator = synth_rate;
    s.noise = synth_noise;
    s.homophone_pairs = synth_homophones;
    s.grammar_skew = synth_grammar_skew;
    return s;
  }

  void validate() const {
    encoder().validate();
    mode();
    penalty().validate();
    if (vocab_size == 0) throw ConfigError("vocab_size must be >= 1");
    if (beam == 0) throw ConfigError("beam must be >= 1");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(lm_learning_rate > 0) || lm_batch_size == 0) throw ConfigError("lm_learning_rate and lm_batch_size must be > 0");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
    if (!(feature_noise >= 0)) throw ConfigError("feature_noise must be >= 0");
    if (!(speed_perturb >= 0 && speed_perturb < 1)) throw ConfigError("speed_perturb must be in [0, 1)");
    if (decoder_embed == 0 || decoder_cells == 0 || lm_embed == 0 || lm_cells == 0)
      throw ConfigError("decoder and LM widths must be >= 1");
    if (feed_blanks && mode() == LossMode::kLatticeExact)
      throw ConfigError("feed_blanks=true needs loss_mode=greedy-path");
  }

  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::string& path);
};

namespace detail {

struct ConfigField {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || v[0] == '-')
    throw ConfigError("config key " + key + ": expected a non-negative integer, got '" + v + "'");
  return std::size_t(x);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config key " + key + ": expected true/false, got '" + v + "'");
}

template <class T>
ConfigField field(T RunConfig::*m) {
  ConfigField f;
  if constexpr (std::is_same_v<T, bool>) {
    f.get = [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); };
    f.set = [m](RunConfig& c, const std::string& v) { c.*m = parse_bool("", v); };
  } else if constexpr (std::is_same_v<T, double>) {
    f.get = [m](const RunConfig& c) { return format_double(c.*m); };
    f.set = [m](RunConfig& c, const std::string& v) { c.*m = parse_double("", v); };
  } else if constexpr (std::is_same_v<T, std::string>) {
    f.get = [m](const RunConfig& c) { return c.*m; };
    f.set = [m](RunConfig& c, const std::string& v) { c.*m = v; };
  } else if constexpr (std::is_same_v<T, int>) {
    f.get = [m](const RunConfig& c) { return std::to_string(c.*m); };
    f.set = [m](RunConfig& c, const std::string& v) { c.*m = int(parse_size("", v)); };
  } else {
    f.get = [m](const RunConfig& c) { return std::to_string(c.*m); };
    f.set = [m](RunConfig& c, const std::string& v) { c.*m = T(parse_size("", v)); };
  }
  return f;
}

inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  static const std::vector<std::pair<std::string, ConfigField>> fields = {
      {"input_dim", field(&RunConfig::input_dim)},
      {"vocab_size", field(&RunConfig::vocab_size)},
      {"downsample", field(&RunConfig::downsample)},
      {"conv_channels", field(&RunConfig::conv_channels)},
      {"mu_count", field(&RunConfig::mu_count)},
      {"lstm_layers", field(&RunConfig::lstm_layers)},
      {"lstm_cells", field(&RunConfig::lstm_cells)},
      {"bidirectional", field(&RunConfig::bidirectional)},
      {"projection_dim", field(&RunConfig::projection_dim)},
      {"row_conv_context", field(&RunConfig::row_conv_context)},
      {"decoder_embed", field(&RunConfig::decoder_embed)},
      {"decoder_cells", field(&RunConfig::decoder_cells)},
      {"feed_blanks", field(&RunConfig::feed_blanks)},
      {"lm_embed", field(&RunConfig::lm_embed)},
      {"lm_cells", field(&RunConfig::lm_cells)},
      {"fusion", field(&RunConfig::fusion)},
      {"lm_epochs", field(&RunConfig::lm_epochs)},
      {"lm_batch_size", field(&RunConfig::lm_batch_size)},
      {"lm_learning_rate", field(&RunConfig::lm_learning_rate)},
      {"init_range", field(&RunConfig::init_range)},
      {"loss_mode", field(&RunConfig::loss_mode)},
      {"confidence_penalty", field(&RunConfig::confidence_penalty)},
      {"beam", field(&RunConfig::beam)},
      {"seed", field(&RunConfig::seed)},
      {"learning_rate", field(&RunConfig::learning_rate)},
      {"momentum", field(&RunConfig::momentum)},
      {"lr_patience", field(&RunConfig::lr_patience)},
      {"batch_size", field(&RunConfig::batch_size)},
      {"epochs", field(&RunConfig::epochs)},
      {"feature_noise", field(&RunConfig::feature_noise)},
      {"speed_perturb", field(&RunConfig::speed_perturb)},
      {"precision", field(&RunConfig::precision)},
      {"vocab", field(&RunConfig::vocab)},
      {"synth_train", field(&RunConfig::synth_train)},
      {"synth_dev", field(&RunConfig::synth_dev)},
      {"synth_min_frames", field(&RunConfig::synth_min_frames)},
      {"synth_max_frames", field(&RunConfig::synth_max_frames)},
      {"synth_min_labels", field(&RunConfig::synth_min_labels)},
      {"synth_max_labels", field(&RunConfig::synth_max_labels)},
      {"synth_rate", field(&RunConfig::synth_rate)},
      {"synth_noise", field(&RunConfig::synth_noise)},
      {"synth_homophones", field(&RunConfig::synth_homophones)},
      {"synth_grammar_skew", field(&RunConfig::synth_grammar_skew)},
  };
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, f] : detail::config_fields())
    if (name == key) {
      try {
        f.set(*this, value);
      } catch (const ConfigError& e) {
        throw ConfigError("config key " + key + ": " + e.what());
      }
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : detail::config_fields()) out += name + "=" + f.get(*this) + "\n";
  return out;
}

inline RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    c.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return c;
}

inline RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace erna
