// tests/cli_test.cpp

// Copyright 2026  The erna authors

// See ../LICENSE for clarification regarding multiple authors
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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "erna/cli/app.hpp"
#include "erna/cli/checkpoint.hpp"
#include "erna/cli/trainer.hpp"

namespace erna {
namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.input_dim = 6;
  c.vocab_size = 3;
  c.conv_channels = 2;
  c.lstm_cells = 4;
  c.decoder_embed = 3;
  c.decoder_cells = 4;
  c.lm_embed = 3;
  c.lm_cells = 4;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("erna_cli_test_" + name)).string();
}

FeatureMatrix random_features(std::size_t T, std::size_t F, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix x(T, F);
  for (auto& v : x.values) v = float(gaussian(rng));
  return x;
}

TEST(RunConfigTest, TextRoundTripIsExact) {
  RunConfig c = tiny_config();
  c.learning_rate = 0.1 + 0.2;  // not representable in few digits
  c.confidence_penalty = 0.2;
  c.loss_mode = "greedy-path";
  c.feed_blanks = true;
  c.downsample = "stack{3}-subsample{3}";
  c.seed = 123456789012345ull;
  const auto text = c.to_text();
  const auto back = RunConfig::from_text(text);
  EXPECT_EQ(back.to_text(), text);
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.downsample, c.downsample);
  EXPECT_TRUE(back.feed_blanks);
}

TEST(RunConfigTest, CommentsBlankLinesAndSpaces) {
  const auto c = RunConfig::from_text("# header\n\n  beam = 4  # trailing\nseed=9\n");
  EXPECT_EQ(c.beam, 4u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.vocab_size, RunConfig{}.vocab_size);
}

TEST(RunConfigTest, BadInputsAreConfigErrors) {
  EXPECT_THROW(RunConfig::from_text("no_such_key=1\n"), ConfigError);
  EXPECT_THROW(RunConfig::from_text("beam=-1\n"), ConfigError);
  EXPECT_THROW(RunConfig::from_text("beam=3x\n"), ConfigError);
  EXPECT_THROW(RunConfig::from_text("fusion=maybe\n"), ConfigError);
  EXPECT_THROW(RunConfig::from_text("just words\n"), ConfigError);
  RunConfig c;
  c.beam = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.precision = 16;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.loss_mode = "ctc";
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.feed_blanks = true;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RunConfigTest, DefaultBeamIsTen) { EXPECT_EQ(RunConfig{}.beam, 10u); }

template <class Real>
void expect_round_trip(ModelParts parts) {
  RunConfig cfg = tiny_config();
  cfg.fusion = parts.fusion;
  Model<Real> m(cfg, parts);
  m.set_step(42);
  // Perturb every value so nothing is left at its init.
  Rng rng(5);
  for (auto* p : m.params().all())
    for (auto& v : p->value.data) v += Real(uniform(rng, -0.3, 0.3));
  const auto path = temp_path("roundtrip.ckpt");
  save_checkpoint(path, m);
  auto back = instantiate<Real>(read_checkpoint(path));
  std::remove(path.c_str());
  EXPECT_EQ(back->step(), 42u);
  EXPECT_EQ(back->parts(), parts);
  EXPECT_EQ(back->config().to_text(), cfg.to_text());
  const auto a = m.params().all(), b = back->params().all();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(a[i]->value.shape, b[i]->value.shape);
    EXPECT_EQ(a[i]->value.data, b[i]->value.data) << a[i]->name;
  }
  if (parts.acoustic) {
    const auto x = random_features(20, cfg.input_dim, 9);
    const auto da = m.decode(x, 1), db = back->decode(x, 1);
    EXPECT_EQ(da.alignment, db.alignment);
    EXPECT_EQ(da.step_logp, db.step_logp);
  }
}

TEST(CheckpointTest, RoundTripIsBitExact64) { expect_round_trip<double>({}); }
TEST(CheckpointTest, RoundTripIsBitExact32) { expect_round_trip<float>({}); }
TEST(CheckpointTest, RoundTripWithLmAndFusion) { expect_round_trip<double>({true, true, true}); }
TEST(CheckpointTest, RoundTripLmOnly) { expect_round_trip<double>({false, true, false}); }

TEST(CheckpointTest, EncodingIsDeterministic) {
  Model<double> a(tiny_config(), {}), b(tiny_config(), {});
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
}

TEST(CheckpointTest, NormalizerRoundTrip) {
  std::vector<Utterance> utts(3);
  for (std::size_t i = 0; i < utts.size(); ++i) {
    utts[i].speaker = i == 2 ? "b" : "a";
    utts[i].features = random_features(10 + i, 6, 30 + i);
  }
  const auto norm = Normalizer::fit(utts);
  Model<double> m(tiny_config(), {});
  const auto c = decode_checkpoint(encode_checkpoint(m, &norm));
  ASSERT_TRUE(c.normalizer.has_value());
  const auto x = random_features(7, 6, 99);
  for (auto mode : {NormMode::kGlobal, NormMode::kPerSpeaker}) {
    EXPECT_EQ(c.normalizer->apply(x, "a", mode).values, norm.apply(x, "a", mode).values);
    EXPECT_EQ(c.normalizer->apply(x, "b", mode).values, norm.apply(x, "b", mode).values);
  }
  EXPECT_FALSE(decode_checkpoint(encode_checkpoint(m)).normalizer.has_value());
}

TEST(CheckpointTest, EveryTruncationIsAFormatError) {
  Model<double> m(tiny_config(), {});
  const auto bytes = encode_checkpoint(m);
  // Every prefix, sampled densely at the start and sparsely in the bulk.
  for (std::size_t n = 0; n < bytes.size(); n += n < 400 ? 1 : 97)
    EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, n)), FormatError) << n;
  EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
}

TEST(CheckpointTest, VersionMismatchIsExplicit) {
  Model<double> m(tiny_config(), {});
  auto bytes = encode_checkpoint(m);
  bytes[8] = char(kCheckpointVersion + 1);
  try {
    decode_checkpoint(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos) << e.what();
  }
  bytes = encode_checkpoint(m);
  bytes[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}

TEST(CheckpointTest, ShapeMismatchRejected) {
  Model<double> m(tiny_config(), {});
  auto c = decode_checkpoint(encode_checkpoint(m));
  c.config.decoder_cells = 5;
  EXPECT_THROW(instantiate<double>(c), FormatError);
}

TEST(CheckpointTest, VocabularySizeMismatchIsConfigError) {
  RunConfig cfg;
  cfg.vocab_size = 3673;
  EXPECT_NO_THROW(check_vocabulary(cfg, Vocabulary::of_size(3673)));
  try {
    check_vocabulary(cfg, Vocabulary::of_size(4622));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("3673"), std::string::npos);
    EXPECT_NE(what.find("4622"), std::string::npos);
  }
}

TEST(TrainerTest, SameSeedSameTrajectory) {
  RunConfig cfg = tiny_config();
  cfg.input_dim = 16;
  cfg.vocab_size = 4;
  cfg.synth_train = 6;
  cfg.synth_dev = 2;
  cfg.epochs = 2;
  cfg.feature_noise = 0.3;
  auto run = [&] {
    const auto corpus = synth_dataset(cfg.synth());
    Model<double> m(cfg, {});
    std::vector<EpochLog> logs;
    train_model(m, corpus.train, corpus.dev, m.params().trainable(), [&](const EpochLog& l) { logs.push_back(l); });
    return std::make_pair(logs, encode_checkpoint(m));
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.first.size(), 2u);
  for (std::size_t i = 0; i < a.first.size(); ++i) {
    EXPECT_EQ(a.first[i].train_loss, b.first[i].train_loss);
    EXPECT_EQ(a.first[i].dev_loss, b.first[i].dev_loss);
  }
  EXPECT_EQ(a.second, b.second);
}

TEST(TrainerTest, EmptyTrainingSetAborts) {
  Model<double> m(tiny_config(), {});
  EXPECT_THROW(train_model(m, {}, {}, m.params().trainable(), nullptr), InfeasibleError);
}

// ---------------------------------------------------------------------------
// Command line, driven in-process.

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "erna");
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::string& path) { return detail::read_file(path); }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

/// Small synthetic setup shared by the CLI tests.
const std::vector<std::string> kTiny = {"--set", "conv_channels=2", "--set", "lstm_cells=4", "--set", "epochs=2",
                                        "--set", "synth_train=6",   "--set", "synth_dev=3",  "--set", "lm_cells=4",
                                        "--set", "lm_embed=3",      "--set", "lm_epochs=2"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("erna_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Trains the tiny model and exports its corpus under data/.
  void train_tiny(const std::string& ckpt = "a.ckpt") {
    const auto r = cli(with_tiny({"train", "--synthetic", "--out", path(ckpt), "--export-data", path("data")}));
    ASSERT_EQ(r.code, 0) << r.err;
  }

  std::filesystem::path dir_;
};

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"bogus"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--synthetic", "--out", path("x"), "--precision", "16"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--synthetic", "--out", path("x"), "--loss-mode", "ctc"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--synthetic", "--out", path("x"), "--set", "no_such_key=1"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--synthetic", "--out", path("x"), "--downsample", "warp{9}"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--out", path("x")}).code, kExitUsage);  // no data source
  EXPECT_EQ(cli({"train", "--synthetic"}).code, kExitUsage);        // no --out
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(cli({"train", "--train", path("missing.tsv"), "--out", path("x")}).code, kExitData);
  write_file(path("junk.ckpt"), "ERNACKPT\x01");
  const auto r = cli({"decode", "--checkpoint", path("junk.ckpt"), "--synthetic"});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("truncated"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrainLogGrammarAndCounts) {
  const auto r = cli(with_tiny({"train", "--synthetic", "--out", path("a.ckpt"), "--log", path("a.log")}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("a.log")), r.out);
  const std::regex line("[A-Z_]+=[^ ]+( [A-Z_]+=[^ ]+)*");
  const std::regex epoch("EPOCH=([0-9]+) LOSS=(-?[0-9.]+) DEV_CER=([0-9.]+)");
  std::size_t epochs = 0;
  for (const auto& l : lines_of(r.out)) {
    EXPECT_TRUE(std::regex_match(l, line)) << l;
    std::smatch m;
    if (std::regex_match(l, m, epoch)) EXPECT_EQ(std::stoul(m[1]), ++epochs);
  }
  EXPECT_EQ(epochs, 2u);
  EXPECT_EQ(lines_of(r.out).front(), "SKIPPED=0 KEPT=6 DEV_SKIPPED=0 DEV_KEPT=3");
  const auto c = read_checkpoint(path("a.ckpt"));
  EXPECT_TRUE(c.normalizer.has_value());
  EXPECT_EQ(c.step, 12u);  // 6 utterances, batch 1, 2 epochs
}

TEST_F(CliTest, TrainingIsByteIdenticalAcrossRuns) {
  for (const char* p : {"64", "32"}) {
    const auto a = cli(with_tiny({"train", "--synthetic", "--seed", "7", "--precision", p, "--out", path("a.ckpt")}));
    const auto b = cli(with_tiny({"train", "--synthetic", "--seed", "7", "--precision", p, "--out", path("b.ckpt")}));
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out) << p;
    EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt"))) << p;
  }
  const auto c = cli(with_tiny({"train", "--synthetic", "--seed", "8", "--out", path("c.ckpt")}));
  EXPECT_NE(slurp(path("a.ckpt")), slurp(path("c.ckpt")));
}

TEST_F(CliTest, AllInfeasibleCorpusAborts) {
  FeatureMatrix x(3, 16);
  save_features(path("short.feat"), x);
  std::ofstream(path("m.tsv")) << "short.feat\tspk\t0 1 2 3\n";
  const auto r = cli(with_tiny({"train", "--train", path("m.tsv"), "--out", path("a.ckpt")}));
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.out.find("SKIPPED=1 KEPT=0"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("infeasible"), std::string::npos) << r.err;
}

TEST_F(CliTest, BeamOneDecodeEqualsGreedy) {
  train_tiny();
  ASSERT_EQ(cli({"decode", "--checkpoint", path("a.ckpt"), "--manifest", path("data/dev.tsv"), "--beam", "1", "--out",
                 path("hyp.txt")})
                .code,
            0);
  const auto c = read_checkpoint(path("a.ckpt"));
  auto m = instantiate<double>(c);
  std::string expect;
  for (const auto& e : read_manifest(path("data/dev.tsv"))) {
    const auto x = c.normalizer->apply(load_features(path("data/" + e.feature_path)), e.speaker, NormMode::kPerSpeaker);
    expect += e.feature_path + "\t" + format_label_ids(greedy_decode(m->encode(x), m->decoder()).labels) + "\n";
  }
  EXPECT_EQ(slurp(path("hyp.txt")), expect);
}

TEST_F(CliTest, DecodeIsDeterministicAndThreadCountFree) {
  train_tiny();
  const std::vector<std::string> base = {"decode", "--checkpoint", path("a.ckpt"), "--synthetic"};
  const auto a = cli(base);
  auto args = base;
  args.insert(args.end(), {"--jobs", "3"});
  const auto b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, cli(base).out);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(lines_of(a.out).size(), 3u);
  EXPECT_EQ(lines_of(a.out).front().rfind("dev-0000\t", 0), 0u);
}

TEST_F(CliTest, DecodeRejectsVocabularyOfOtherSize) {
  train_tiny();
  Vocabulary::of_size(9).save(path("v9.txt"));
  const auto r = cli({"decode", "--checkpoint", path("a.ckpt"), "--synthetic", "--vocab", path("v9.txt")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("trained with 8 labels but the vocabulary file has 9"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"decode", "--checkpoint", path("a.ckpt"), "--synthetic", "--vocab", path("data/vocab.txt")}).code, 0);
}

TEST_F(CliTest, EvalReportsPooledCer) {
  train_tiny();
  const auto refs = read_manifest(path("data/dev.tsv"));
  std::string same, empty;
  for (const auto& e : refs) {
    same += e.feature_path + "\t" + format_label_ids(e.labels) + "\n";
    empty += e.feature_path + "\t\n";
  }
  std::ofstream(path("same.txt")) << same;
  std::ofstream(path("empty.txt")) << empty;
  auto r = cli({"eval", "--ref", path("data/dev.tsv"), "--hyp", path("same.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("CER=0.0000 S=0 D=0 I=0 REFLEN="), std::string::npos) << r.out;
  r = cli({"eval", "--ref", path("data/dev.tsv"), "--hyp", path("empty.txt")});
  EXPECT_NE(r.out.find("CER=100.0000 S=0 D="), std::string::npos) << r.out;

  // Same numbers as the metrics call on the decoded pairs.
  ASSERT_EQ(cli({"decode", "--checkpoint", path("a.ckpt"), "--manifest", path("data/dev.tsv"), "--out", path("h.txt")}).code, 0);
  r = cli({"eval", "--ref", path("data/dev.tsv"), "--hyp", path("h.txt")});
  std::vector<std::pair<LabelSeq, LabelSeq>> pairs;
  const auto hyps = lines_of(slurp(path("h.txt")));
  for (std::size_t i = 0; i < refs.size(); ++i)
    pairs.emplace_back(refs[i].labels, parse_label_ids(hyps[i].substr(hyps[i].find('\t') + 1), i));
  const auto direct = cer(pairs);
  const std::string expect = "CER=" + cli::fmt("%.4f", direct.cer) + " S=" + std::to_string(direct.counts.substitutions) +
                             " D=" + std::to_string(direct.counts.deletions) + " I=" +
                             std::to_string(direct.counts.insertions) + " REFLEN=" + std::to_string(direct.counts.ref_length);
  EXPECT_EQ(lines_of(r.out).back(), expect);
}

TEST_F(CliTest, EvalListsUnknownIds) {
  train_tiny();
  std::ofstream(path("h.txt")) << "nope-1\t0 1\ndev/dev-0000.feat\t1\nnope-2\t\n";
  const auto r = cli({"eval", "--ref", path("data/dev.tsv"), "--hyp", path("h.txt")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("nope-1, nope-2"), std::string::npos) << r.err;
}

TEST_F(CliTest, LmAndFusionPipeline) {
  train_tiny();
  auto r = cli(with_tiny({"lm-train", "--synthetic", "--out", path("lm.ckpt")}));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::regex epoch("EPOCH=[0-9]+ LOSS=[0-9.]+ DEV_PPL=[0-9.]+");
  for (const auto& l : lines_of(r.out)) EXPECT_TRUE(std::regex_match(l, epoch)) << l;
  r = cli({"fusion-train", "--synthetic", "--checkpoint", path("a.ckpt"), "--lm-checkpoint", path("lm.ckpt"), "--out",
           path("f.ckpt"), "--set", "epochs=1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto base = read_checkpoint(path("a.ckpt")), lm = read_checkpoint(path("lm.ckpt")),
             fused = read_checkpoint(path("f.ckpt"));
  EXPECT_EQ(fused.parts, (ModelParts{true, true, true}));
  for (const auto& p : fused.params) {
    const auto* src = p.name.rfind("lm.", 0) == 0 ? lm.find(p.name) : base.find(p.name);
    if (p.name.rfind("fusion.", 0) == 0) continue;
    ASSERT_NE(src, nullptr) << p.name;
    EXPECT_EQ(src->values, p.values) << p.name;
  }
  for (const char* f : {"on", "off"}) {
    r = cli({"decode", "--checkpoint", path("f.ckpt"), "--synthetic", "--fusion", f});
    EXPECT_EQ(r.code, 0) << r.err;
  }
  // Unfused decode of the fused checkpoint is the base model's decode.
  EXPECT_EQ(r.out, cli({"decode", "--checkpoint", path("a.ckpt"), "--synthetic"}).out);
  r = cli({"decode", "--checkpoint", path("a.ckpt"), "--synthetic", "--fusion", "on"});
  EXPECT_EQ(r.code, kExitData);
}

TEST_F(CliTest, SelfChecksPass) {
  auto r = cli({"oracle-check", "--trials", "40"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("MAX_ABS_DIFF=", 0), 0u);
  r = cli({"gradcheck"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("MAX_REL_ERROR=", 0), 0u);
  EXPECT_EQ(cli({"gradcheck", "--precision", "32"}).code, kExitUsage);
}

}  // namespace
}  // namespace erna
