// erna/cli/app.hpp

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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "erna/cli/checkpoint.hpp"
#include "erna/cli/checks.hpp"
#include "erna/cli/trainer.hpp"

// Command-line front end. run_cli() is the whole program minus main(), so
// tests can drive it in-process.
//
// Machine-readable lines are space-separated KEY=VALUE tokens, keys in
// [A-Z_]+, values without spaces:
//
//   train         SKIPPED=<n> KEPT=<n> DEV_SKIPPED=<n> DEV_KEPT=<n>
//                 EPOCH=<k> LOSS=<dev nll> DEV_CER=<percent>   (one per epoch)
//                 STEPS=<n> TRAIN_CER=<f> DEV_CER=<f> DEV_ENTROPY=<nats>
//   fusion-train  same as train
//   lm-train      EPOCH=<k> LOSS=<train nll per char> DEV_PPL=<f>
//   eval          CER=<f> S=<n> D=<n> I=<n> REFLEN=<n>
//   gradcheck     MAX_REL_ERROR=<e> PARAM=<name> INDEX=<i> COORDS=<n>
//   oracle-check  MAX_ABS_DIFF=<e> TRIALS=<n>
//
// Exit codes: 0 ok, 1 usage, 2 data or format error, 3 self check failed.

namespace erna {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitCheckFailed = 3;

namespace cli {

/// Bad flags or config values; maps to the usage exit code.
class UsageFailure : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> downsample;
  std::optional<double> penalty;
  std::optional<std::string> loss_mode;
  std::optional<std::size_t> beam;
  std::optional<int> precision;

  bool synthetic = false;
  std::string train_manifest;
  std::string dev_manifest;
  std::string vocab;
  std::string export_dir;
  std::string out;
  std::string log;
  std::string checkpoint;
  std::string lm_checkpoint;
  std::string fusion;
  std::string ref;
  std::string hyp;
  std::size_t jobs = 1;
  std::size_t trials = 200;
};

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

/// Writes to the output stream and, when a path is given, to a log file.
class Logger {
 public:
  Logger(std::ostream& out, const std::string& path) : out_(out) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw FormatError("cannot write log " + path, 0);
    }
  }
  void line(const std::string& s) {
    out_ << s << '\n';
    if (file_.is_open()) file_ << s << '\n';
  }
  void flush() {
    out_.flush();
    if (file_.is_open()) file_.flush();
  }

 private:
  std::ostream& out_;
  std::ofstream file_;
};

/// Applies the named flags and --set overrides to `cfg`.
inline RunConfig apply_overrides(RunConfig cfg, const Options& o) {
  try {
    for (const auto& kv : o.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.downsample) cfg.downsample = *o.downsample;
    if (o.penalty) cfg.confidence_penalty = *o.penalty;
    if (o.loss_mode) cfg.loss_mode = *o.loss_mode;
    if (o.beam) cfg.beam = *o.beam;
    if (o.precision) cfg.precision = *o.precision;
    if (!o.vocab.empty()) cfg.vocab = o.vocab;
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageFailure(e.what());
  }
  return cfg;
}

inline RunConfig resolve_config(const Options& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream probe(o.config_path);
    if (!probe) throw UsageFailure("cannot open config " + o.config_path);
    try {
      cfg = RunConfig::load(o.config_path);
    } catch (const ConfigError& e) {
      throw UsageFailure(e.what());
    }
  }
  return apply_overrides(cfg, o);
}

// ---------------------------------------------------------------------------
// Data

struct Data {
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
};

/// Manifest utterances. The utterance id is the feature path as written in
/// the manifest; relative paths are read relative to the manifest.
inline std::vector<Utterance> load_manifest(const std::string& path, const RunConfig& cfg, bool with_features = true) {
  const auto entries = read_manifest(path);
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<Utterance> out;
  for (const auto& e : entries) {
    Utterance u;
    u.id = e.feature_path;
    u.speaker = e.speaker;
    u.labels = e.labels;
    for (Label l : u.labels)
      if (l >= cfg.vocab_size)
        throw VocabularyError(path + ": utterance " + u.id + " has label " + std::to_string(l) + " but the model has " +
                              std::to_string(cfg.vocab_size) + " labels");
    if (with_features) {
      const std::filesystem::path fp(e.feature_path);
      u.features = load_features((fp.is_absolute() ? fp : base / fp).string());
      if (u.features.dims != cfg.input_dim)
        throw ConfigError(u.id + " has " + std::to_string(u.features.dims) + " feature dims, model expects " +
                          std::to_string(cfg.input_dim));
    }
    out.push_back(std::move(u));
  }
  return out;
}

/// Reads --vocab (or the config's vocab path) and sizes the output layer to it.
inline void adopt_vocabulary(RunConfig& cfg) {
  if (cfg.vocab.empty()) return;
  cfg.vocab_size = Vocabulary::load(cfg.vocab).num_labels();
  cfg.validate();
}

inline Data load_data(const Options& o, const RunConfig& cfg, bool with_features = true) {
  Data d;
  if (o.synthetic) {
    auto c = synth_dataset(cfg.synth());
    d.train = std::move(c.train);
    d.dev = std::move(c.dev);
  } else {
    d.train = load_manifest(o.train_manifest, cfg, with_features);
    if (!o.dev_manifest.empty()) d.dev = load_manifest(o.dev_manifest, cfg, with_features);
  }
  return d;
}

/// Writes the synthetic corpus as feature files plus train/dev manifests and
/// a vocabulary file.
inline void export_corpus(const std::string& dir, const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const auto c = synth_dataset(cfg.synth());
  std::error_code ec;
  for (const char* split : {"train", "dev"}) {
    fs::create_directories(fs::path(dir) / split, ec);
    if (ec) throw FormatError("cannot create " + (fs::path(dir) / split).string() + ": " + ec.message(), 0);
  }
  auto write_split = [&](const std::vector<Utterance>& utts, const std::string& split) {
    std::vector<ManifestEntry> entries;
    for (const auto& u : utts) {
      const std::string rel = split + "/" + u.id + ".feat";
      save_features((fs::path(dir) / rel).string(), u.features);
      entries.push_back({rel, u.speaker, u.labels});
    }
    write_manifest((fs::path(dir) / (split + ".tsv")).string(), entries);
  };
  write_split(c.train, "train");
  write_split(c.dev, "dev");
  c.vocab.save((fs::path(dir) / "vocab.txt").string());
}

inline std::vector<Utterance> normalized(const Normalizer& n, std::vector<Utterance> utts) {
  for (auto& u : utts) u.features = n.apply(u.features, u.speaker, NormMode::kPerSpeaker);
  return utts;
}

// ---------------------------------------------------------------------------
// Training

inline void log_epoch(Logger& log, const EpochLog& e) {
  log.line("EPOCH=" + std::to_string(e.epoch) + " LOSS=" + fmt("%.6f", e.dev_loss) + " DEV_CER=" + fmt("%.2f", e.dev_cer));
  log.flush();
}

/// Drops utterances with more labels than encoder steps and reports counts.
/// Aborts when nothing trainable is left.
template <class Real>
Data feasible_data(const Model<Real>& m, const Data& d, Logger& log, std::ostream& err) {
  auto [train, skipped] = feasible_subset(m, d.train);
  auto [dev, dev_skipped] = feasible_subset(m, d.dev);
  log.line("SKIPPED=" + std::to_string(skipped) + " KEPT=" + std::to_string(train.size()) +
           " DEV_SKIPPED=" + std::to_string(dev_skipped) + " DEV_KEPT=" + std::to_string(dev.size()));
  if (train.empty()) {
    if (d.train.empty()) throw ConfigError("training set is empty");
    const auto& u = d.train.front();
    err << "error: all " << d.train.size()
        << " training utterances have more labels than encoder steps; check the downsample spec\n";
    throw InfeasibleError(m.encoder().output_length(u.features.frames), u.labels.size());
  }
  return {std::move(train), std::move(dev)};
}

template <class Real>
void log_summary(Logger& log, const Model<Real>& m, const Data& d) {
  const auto tr = evaluate(m, d.train);
  const auto& dev = d.dev.empty() ? d.train : d.dev;
  const auto dv = evaluate(m, dev);
  log.line("STEPS=" + std::to_string(m.step()) + " TRAIN_CER=" + fmt("%.2f", tr.cer) + " DEV_CER=" +
           fmt("%.2f", dv.cer) + " DEV_ENTROPY=" + fmt("%.6f", mean_output_entropy(m, dev)));
}

template <class Real>
int train(const Options& o, RunConfig cfg, std::ostream& out, std::ostream& err) {
  Logger log(out, o.log);
  adopt_vocabulary(cfg);
  if (!o.export_dir.empty()) export_corpus(o.export_dir, cfg);
  const Data raw = load_data(o, cfg);
  const auto norm = Normalizer::fit(raw.train);
  const Data data{normalized(norm, raw.train), normalized(norm, raw.dev)};
  Model<Real> m(cfg, {});
  const Data d = feasible_data(m, data, log, err);
  train_model(m, d.train, d.dev, m.params().trainable(), [&](const EpochLog& e) { log_epoch(log, e); });
  log_summary(log, m, d);
  save_checkpoint(o.out, m, &norm);
  log.flush();
  return kExitOk;
}

template <class Real>
int lm_train(const Options& o, RunConfig cfg, std::ostream& out) {
  Logger log(out, o.log);
  adopt_vocabulary(cfg);
  const Data d = load_data(o, cfg, false);
  std::vector<LabelSeq> train, dev;
  for (const auto& u : d.train) train.push_back(u.labels);
  for (const auto& u : d.dev) dev.push_back(u.labels);
  Model<Real> m(cfg, {false, true, false});
  train_lm(m.mutable_lm(), m.params().with_prefix("lm."), train, dev, cfg.lm_train(),
           [&](std::size_t epoch, const LmTrainLog& l) {
             log.line("EPOCH=" + std::to_string(epoch + 1) + " LOSS=" + fmt("%.6f", l.train_loss.back()) +
                      " DEV_PPL=" + fmt("%.6f", l.dev_perplexity.back()));
             log.flush();
           });
  save_checkpoint(o.out, m);
  return kExitOk;
}

template <class Real>
int fusion_train(const Options& o, const Checkpoint& base, const Checkpoint& lmc, std::ostream& out,
                 std::ostream& err) {
  Logger log(out, o.log);
  if (!base.parts.acoustic) throw ConfigError(o.checkpoint + " holds no acoustic model");
  if (!lmc.parts.lm) throw ConfigError(o.lm_checkpoint + " holds no language model");
  if (lmc.config.vocab_size != base.config.vocab_size)
    throw ConfigError("LM was trained with " + std::to_string(lmc.config.vocab_size) +
                      " labels but the acoustic model has " + std::to_string(base.config.vocab_size));
  RunConfig cfg = base.config;
  cfg.lm_embed = lmc.config.lm_embed;
  cfg.lm_cells = lmc.config.lm_cells;
  cfg = apply_overrides(cfg, o);
  cfg.fusion = true;
  Model<Real> m(cfg, {true, true, true});
  load_params(base, m.params(), "enc.");
  load_params(base, m.params(), "dec.");
  load_params(lmc, m.params(), "lm.");
  m.reset_fusion_from_decoder();
  m.set_step(base.step);
  Data data = load_data(o, cfg);
  if (base.normalizer) data = {normalized(*base.normalizer, data.train), normalized(*base.normalizer, data.dev)};
  const Data d = feasible_data(m, data, log, err);
  train_fusion(m, d.train, d.dev, [&](const EpochLog& e) { log_epoch(log, e); });
  log_summary(log, m, d);
  save_checkpoint(o.out, m, base.normalizer ? &*base.normalizer : nullptr);
  log.flush();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Decoding and scoring

inline void write_hypotheses(std::ostream& os, const std::vector<Utterance>& utts, const std::vector<LabelSeq>& hyps) {
  for (std::size_t i = 0; i < utts.size(); ++i) os << utts[i].id << '\t' << format_label_ids(hyps[i]) << '\n';
}

template <class Real>
int decode(const Options& o, const Checkpoint& c, std::ostream& out) {
  if (!c.parts.acoustic) throw ConfigError(o.checkpoint + " holds no acoustic model");
  auto m = instantiate<Real>(c);
  RunConfig& cfg = m->mutable_config();
  if (o.seed) cfg.seed = *o.seed;
  if (o.beam) cfg.beam = *o.beam;
  if (cfg.beam == 0) throw UsageFailure("--beam must be >= 1");
  if (!o.vocab.empty()) check_vocabulary(cfg, Vocabulary::load(o.vocab));
  if (!o.fusion.empty()) {
    if (o.fusion == "on" && !c.parts.fusion) throw ConfigError(o.checkpoint + " has no fusion layer; run fusion-train");
    cfg.fusion = o.fusion == "on";
  }
  if (!o.lm_checkpoint.empty()) {
    if (!c.parts.fusion) throw ConfigError("--lm-checkpoint needs a checkpoint with a fusion layer");
    const auto lmc = read_checkpoint(o.lm_checkpoint);
    if (lmc.config.vocab_size != cfg.vocab_size) throw ConfigError("LM vocabulary size differs from the model's");
    load_params(lmc, m->params(), "lm.");
  }
  std::vector<Utterance> utts;
  if (o.synthetic)
    utts = synth_dataset(cfg.synth()).dev;
  else
    utts = load_manifest(o.train_manifest, cfg);
  if (c.normalizer) utts = normalized(*c.normalizer, std::move(utts));

  std::vector<LabelSeq> hyps(utts.size());
  const std::size_t jobs = std::max<std::size_t>(1, std::min(o.jobs, utts.size()));
  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < utts.size(); i += jobs) hyps[i] = m->decode(utts[i].features, cfg.beam).labels;
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work, j);
    for (auto& t : pool) t.join();
  }
  if (o.out.empty() || o.out == "-") {
    write_hypotheses(out, utts, hyps);
  } else {
    std::ofstream f(o.out, std::ios::trunc);
    if (!f) throw FormatError("cannot write " + o.out, 0);
    write_hypotheses(f, utts, hyps);
  }
  return kExitOk;
}

/// Hypothesis file: "<utt-id>\t<label ids>" per line. The label part may be
/// empty, and so may the tab.
inline std::vector<std::pair<std::string, LabelSeq>> read_hypotheses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open hypothesis file " + path, 0);
  std::vector<std::pair<std::string, LabelSeq>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    out.emplace_back(line.substr(0, tab), tab == std::string::npos ? LabelSeq{} : parse_label_ids(line.substr(tab + 1), lineno));
  }
  return out;
}

struct EvalResult {
  CerReport report;
  std::size_t scored = 0;
  std::size_t missing_hyps = 0;
};

/// Pools edit counts over every reference utterance. A reference without a
/// hypothesis line scores as an empty hypothesis.
inline EvalResult score(const std::vector<Utterance>& refs, const std::vector<std::pair<std::string, LabelSeq>>& hyps) {
  std::map<std::string, const LabelSeq*> ref_by_id;
  for (const auto& r : refs)
    if (!ref_by_id.emplace(r.id, &r.labels).second) throw FormatError("duplicate reference id " + r.id, 0);
  std::map<std::string, const LabelSeq*> hyp_by_id;
  std::vector<std::string> unknown;
  for (const auto& [id, labels] : hyps) {
    if (!ref_by_id.count(id)) unknown.push_back(id);
    if (!hyp_by_id.emplace(id, &labels).second) throw FormatError("duplicate hypothesis id " + id, 0);
  }
  if (!unknown.empty()) {
    std::string list;
    for (std::size_t i = 0; i < unknown.size(); ++i) list += (i ? ", " : "") + unknown[i];
    throw FormatError(std::to_string(unknown.size()) + " hypothesis ids not in the reference: " + list, 0);
  }
  EvalResult r;
  std::vector<std::pair<LabelSeq, LabelSeq>> pairs;
  for (const auto& ref : refs) {
    const auto it = hyp_by_id.find(ref.id);
    if (it == hyp_by_id.end()) ++r.missing_hyps;
    pairs.emplace_back(ref.labels, it == hyp_by_id.end() ? LabelSeq{} : *it->second);
  }
  r.scored = pairs.size();
  r.report = cer(pairs);
  return r;
}

inline int eval(const Options& o, const RunConfig& cfg, std::ostream& out) {
  std::vector<Utterance> refs;
  if (o.synthetic)
    refs = synth_dataset(cfg.synth()).dev;
  else {
    RunConfig wide = cfg;
    wide.vocab_size = std::size_t(-1) / 2;  // any id is a valid reference label here
    refs = load_manifest(o.ref, wide, false);
  }
  const auto r = score(refs, read_hypotheses(o.hyp));
  const auto& e = r.report.counts;
  out << "Scored " << r.scored << " utterances, " << e.ref_length << " reference labels";
  if (r.missing_hyps) out << " (" << r.missing_hyps << " without a hypothesis)";
  out << "\nSubstitutions " << e.substitutions << ", deletions " << e.deletions << ", insertions " << e.insertions
      << "\nCER " << fmt("%.2f", r.report.cer) << "%\n";
  out << "CER=" << fmt("%.4f", r.report.cer) << " S=" << e.substitutions << " D=" << e.deletions
      << " I=" << e.insertions << " REFLEN=" << e.ref_length << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int gradcheck(const Options& o, std::ostream& out) {
  if (o.precision && *o.precision != 64) throw UsageFailure("gradcheck runs in 64-bit only");
  const auto r = full_model_gradcheck(o.seed.value_or(7));
  out << "MAX_REL_ERROR=" << fmt("%.3e", r.max_rel_error) << " PARAM=" << r.worst_param << " INDEX=" << r.worst_index
      << " COORDS=" << r.coordinates << '\n';
  return r.max_rel_error <= 1e-4 ? kExitOk : kExitCheckFailed;
}

inline int oracle_check(const Options& o, std::ostream& out) {
  if (o.precision && *o.precision != 64) throw UsageFailure("oracle-check runs in 64-bit only");
  const auto r = lattice_oracle_check(o.trials, o.seed.value_or(7));
  out << "MAX_ABS_DIFF=" << fmt("%.3e", r.max_abs_diff) << " TRIALS=" << r.trials << '\n';
  return r.max_abs_diff <= 1e-9 ? kExitOk : kExitCheckFailed;
}

}  // namespace cli

/// Parses args (args[0] is the program name) and runs one subcommand.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using cli::Options;
  Options o;
  CLI::App app{"erna: streaming speech transducer trainer and decoder", "erna"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto model_flags = [&](CLI::App* s, bool with_config) {
    if (with_config) s->add_option("--config", o.config_path, "key=value config file")->check(CLI::ExistingFile);
    s->add_option("--set", o.sets, "Override one config key, key=value (repeatable)");
    s->add_option("--seed", o.seed, "Random seed");
    s->add_option("--downsample", o.downsample, "Down-sampling spec, e.g. \"conv-stride{2}+pooling{2,4}-width{2,2}\"");
    s->add_option("--confidence-penalty", o.penalty, "Entropy penalty weight lambda")->check(CLI::NonNegativeNumber);
    s->add_option("--loss-mode", o.loss_mode, "lattice-exact or greedy-path")
        ->check(CLI::IsMember({"lattice-exact", "greedy-path"}));
    s->add_option("--precision", o.precision, "32 or 64")->check(CLI::IsMember({32, 64}));
  };
  auto data_flags = [&](CLI::App* s) {
    auto* syn = s->add_flag("--synthetic", o.synthetic, "Use the seeded synthetic corpus");
    auto* tr = s->add_option("--train", o.train_manifest, "Training manifest: <features>\\t<speaker>\\t<label ids>");
    s->add_option("--dev", o.dev_manifest, "Dev manifest")->excludes(syn);
    syn->excludes(tr);
    s->add_option("--vocab", o.vocab, "Vocabulary file, one label per line");
    s->add_option("--log", o.log, "Also write log lines to this file");
  };

  auto* train = app.add_subcommand("train", "Train an acoustic model");
  model_flags(train, true);
  data_flags(train);
  train->add_option("--export-data", o.export_dir, "Write the synthetic corpus as manifests and feature files");
  train->add_option("--beam", o.beam, "Beam size stored for decoding")->check(CLI::PositiveNumber);
  train->add_option("--out", o.out, "Checkpoint path")->required();

  auto* lm = app.add_subcommand("lm-train", "Train a character LM on transcripts");
  model_flags(lm, true);
  data_flags(lm);
  lm->add_option("--out", o.out, "LM checkpoint path")->required();

  auto* fus = app.add_subcommand("fusion-train", "Train the fusion layer of an acoustic model and an LM");
  model_flags(fus, false);
  data_flags(fus);
  fus->add_option("--checkpoint", o.checkpoint, "Acoustic checkpoint")->required()->check(CLI::ExistingFile);
  fus->add_option("--lm-checkpoint", o.lm_checkpoint, "LM checkpoint")->required()->check(CLI::ExistingFile);
  fus->add_option("--out", o.out, "Fused checkpoint path")->required();

  auto* dec = app.add_subcommand("decode", "Decode a manifest");
  dec->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  auto* dec_syn = dec->add_flag("--synthetic", o.synthetic, "Decode the synthetic dev split");
  auto* dec_man = dec->add_option("--manifest", o.train_manifest, "Manifest to decode");
  dec_syn->excludes(dec_man);
  dec->add_option("--seed", o.seed, "Seed of the synthetic corpus (default: checkpoint's)");
  dec->add_option("--beam", o.beam, "Beam size, 1 is greedy (default: checkpoint's, 10)")->check(CLI::PositiveNumber);
  dec->add_option("--fusion", o.fusion, "on or off (default: as trained)")->check(CLI::IsMember({"on", "off"}));
  dec->add_option("--lm-checkpoint", o.lm_checkpoint, "Replace the fused model's LM")->check(CLI::ExistingFile);
  dec->add_option("--vocab", o.vocab, "Vocabulary file to check against the checkpoint");
  dec->add_option("--precision", o.precision, "32 or 64 (default: checkpoint's)")->check(CLI::IsMember({32, 64}));
  dec->add_option("--jobs", o.jobs, "Decoding threads")->check(CLI::PositiveNumber);
  dec->add_option("--out", o.out, "Hypothesis file (default: stdout)");

  auto* ev = app.add_subcommand("eval", "Score hypotheses against references");
  auto* ev_syn = ev->add_flag("--synthetic", o.synthetic, "References are the synthetic dev split");
  auto* ev_ref = ev->add_option("--ref", o.ref, "Reference manifest");
  ev_syn->excludes(ev_ref);
  ev->add_option("--config", o.config_path, "Config of the synthetic corpus")->check(CLI::ExistingFile);
  ev->add_option("--set", o.sets, "Override one config key, key=value");
  ev->add_option("--seed", o.seed, "Seed of the synthetic corpus");
  ev->add_option("--hyp", o.hyp, "Hypothesis file")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  gc->add_option("--seed", o.seed, "Seed");
  gc->add_option("--precision", o.precision, "Must be 64")->check(CLI::IsMember({32, 64}));

  auto* oc = app.add_subcommand("oracle-check", "Lattice loss against path enumeration");
  oc->add_option("--seed", o.seed, "Seed");
  oc->add_option("--trials", o.trials, "Random problems")->check(CLI::PositiveNumber);
  oc->add_option("--precision", o.precision, "Must be 64")->check(CLI::IsMember({32, 64}));

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto need_source = [&](const std::string& manifest, const char* flag) {
    if (!o.synthetic && manifest.empty()) throw cli::UsageFailure(std::string("need --synthetic or ") + flag);
  };
  try {
    if (*train) {
      need_source(o.train_manifest, "--train");
      const auto cfg = cli::resolve_config(o);
      return cfg.precision == 32 ? cli::train<float>(o, cfg, out, err) : cli::train<double>(o, cfg, out, err);
    }
    if (*lm) {
      need_source(o.train_manifest, "--train");
      const auto cfg = cli::resolve_config(o);
      return cfg.precision == 32 ? cli::lm_train<float>(o, cfg, out) : cli::lm_train<double>(o, cfg, out);
    }
    if (*fus) {
      need_source(o.train_manifest, "--train");
      const auto base = read_checkpoint(o.checkpoint);
      const auto lmc = read_checkpoint(o.lm_checkpoint);
      const int p = o.precision.value_or(base.config.precision);
      return p == 32 ? cli::fusion_train<float>(o, base, lmc, out, err)
                     : cli::fusion_train<double>(o, base, lmc, out, err);
    }
    if (*dec) {
      need_source(o.train_manifest, "--manifest");
      const auto c = read_checkpoint(o.checkpoint);
      const int p = o.precision.value_or(c.config.precision);
      return p == 32 ? cli::decode<float>(o, c, out) : cli::decode<double>(o, c, out);
    }
    if (*ev) {
      need_source(o.ref, "--ref");
      return cli::eval(o, cli::resolve_config(o), out);
    }
    if (*gc) return cli::gradcheck(o, out);
    if (*oc) return cli::oracle_check(o, out);
  } catch (const cli::UsageFailure& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace erna
