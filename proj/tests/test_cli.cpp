// Copyright 2026 The pulse-se Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "pulse/cli.hpp"
#include "test_util.hpp"

namespace pulse {
namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), "--threads=1");
  const int code = run_cli(std::move(args), {out, err});
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::vector<std::string> kSmall = {"--n-train", "3", "--n-val", "2", "--n-test", "2", "--clip-seconds", "0.25"};

std::filesystem::path small_corpus(const std::string& name) {
  const auto dir = testing::fresh_dir(name);
  std::vector<std::string> a{"synth-data", "--out", dir.string(), "--seed", "4"};
  a.insert(a.end(), kSmall.begin(), kSmall.end());
  EXPECT_EQ(cli(a).code, kExitOk);
  return dir;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"synth-data"}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"risk-check", "--pi", "1.5"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--out", "x", "--precision", "half"}).code, kExitUsage);
  const auto dir = small_corpus("cli_usage");
  const CliRun r = cli({"train", "--data", dir.string(), "--out", (dir / "run").string(), "--prior", "1.5"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("prior"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, MissingCorpusIsAnIoError) {
  const auto dir = testing::fresh_dir("cli_nocorpus");
  EXPECT_EQ(cli({"train", "--data", (dir / "none").string(), "--out", (dir / "run").string()}).code, kExitIo);
}

TEST(Cli, SynthDataIsByteIdentical) {
  const auto a = small_corpus("cli_synth_a"), b = small_corpus("cli_synth_b");
  EXPECT_EQ(slurp(a / kManifestName), slurp(b / kManifestName));
  for (const auto& e : std::filesystem::recursive_directory_iterator(a))
    if (e.is_regular_file()) EXPECT_EQ(slurp(e.path()), slurp(b / std::filesystem::relative(e.path(), a)));
}

TEST(Cli, RiskCheckIsDeterministic) {
  const std::vector<std::string> a{"risk-check", "--samples", "5000", "--resamples", "50", "--seed", "3"};
  const CliRun r1 = cli(a), r2 = cli(a);
  EXPECT_EQ(r1.code, r2.code);
  EXPECT_EQ(r1.out, r2.out);
  const auto j = nlohmann::json::parse(r1.out);
  EXPECT_TRUE(j.contains("passed"));
  const CliRun o = cli({"risk-check", "--samples", "5000", "--resamples", "50", "--scorer", "overfit"});
  EXPECT_EQ(o.code, kExitOk) << o.out;
}

TEST(Cli, TrainEnhanceEvaluate) {
  const auto dir = small_corpus("cli_pipeline");
  const auto run = dir / "run";
  const CliRun t = cli({"train", "--data", dir.string(), "--out", run.string(), "--epochs", "1", "--batch-size", "2",
                     "--tile-frames", "8", "--quiet", "--method", "pulse_upu"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_TRUE(t.err.empty());
  const auto summary = nlohmann::json::parse(t.out);
  EXPECT_EQ(summary["method"], "pulse_upu");
  EXPECT_EQ(summary["best_epoch"], 1);
  EXPECT_TRUE(std::filesystem::exists(run / kMetricsName));
  EXPECT_TRUE(std::filesystem::exists(run / checkpoint_name(1)));

  // Evaluate matches the library call on the same checkpoint.
  const CliRun e = cli({"evaluate", "--model", run.string(), "--data", dir.string(), "--split", "test", "--report",
                     (dir / "report.json").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  CorpusReader reader(dir);
  const Checkpoint ckpt = load_checkpoint(resolve_checkpoint(run));
  const EvalReport lib = evaluate_corpus(ckpt.params, reader, Split::test, ckpt.meta.stft);
  EXPECT_EQ(nlohmann::json::parse(e.out), lib.to_json());
  EXPECT_EQ(slurp(dir / "report.json"), e.out);

  // Enhance a directory and a single file.
  const CliRun d = cli({"enhance", "--model", run.string(), "--in", (dir / "test/noisy").string(), "--out",
                     (dir / "enh").string()});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  const auto outs = nlohmann::json::parse(d.out)["outputs"];
  ASSERT_EQ(outs.size(), 2u);
  const Waveform noisy = read_wav(dir / "test/noisy/test-noisy-0000.wav");
  const Waveform enh = read_wav(dir / "enh/test-noisy-0000.wav");
  EXPECT_EQ(enh.size(), noisy.size());
  const Waveform lib_enh = enhance_clip(ckpt.params, noisy, ckpt.meta.stft);
  for (std::size_t i = 0; i < enh.size(); ++i) EXPECT_EQ(enh.samples[i], quantize_pcm16(lib_enh.samples[i]));
}

TEST(Cli, CorruptedCheckpointWritesNothing) {
  const auto dir = small_corpus("cli_corrupt");
  const auto run = dir / "run";
  ASSERT_EQ(cli({"train", "--data", dir.string(), "--out", run.string(), "--epochs", "1", "--batch-size", "2",
                 "--tile-frames", "8", "--quiet"})
                .code,
            kExitOk);
  const auto ckpt = run / checkpoint_name(1);
  std::string bytes = slurp(ckpt);
  bytes[bytes.size() / 2] ^= 0x5a;
  std::ofstream(ckpt, std::ios::binary | std::ios::trunc) << bytes;

  const auto out = dir / "enh";
  const CliRun r = cli({"enhance", "--model", ckpt.string(), "--in", (dir / "test/noisy").string(), "--out", out.string()});
  EXPECT_EQ(r.code, kExitCheckpoint);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(out));
  EXPECT_EQ(cli({"evaluate", "--model", run.string(), "--data", dir.string()}).code, kExitCheckpoint);
}

}  // namespace
}  // namespace pulse
