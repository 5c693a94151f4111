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

#include "pulse/checkpoint.hpp"
#include "pulse/config.hpp"
#include "pulse/wav.hpp"
#include "test_util.hpp"

namespace pulse {
namespace {

TEST(Wav, RoundTripWithinHalfAStep) {
  const auto dir = testing::fresh_dir("wav");
  Waveform w = testing::random_wave(5000, 8000, 1, 0.25);
  w.samples[0] = 0.999;
  w.samples[1] = -1.0;
  write_wav(dir / "a.wav", w);
  const Waveform r = read_wav(dir / "a.wav", 8000);
  EXPECT_EQ(r.sample_rate, 8000);
  ASSERT_EQ(r.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::abs(r.samples[i] - w.samples[i]), 0x1p-15);
  EXPECT_EQ(std::filesystem::file_size(dir / "a.wav"), 44u + 2 * 5000);
}

TEST(Wav, QuantizedValuesAreFixedPoints) {
  const auto dir = testing::fresh_dir("wav_fixed");
  Waveform w = testing::random_wave(1000, 16000, 2);
  for (double& v : w.samples) v = quantize_pcm16(v);
  write_wav(dir / "q.wav", w);
  EXPECT_EQ(read_wav(dir / "q.wav").samples, w.samples);
  Waveform z;
  z.sample_rate = 8000;
  z.samples.assign(10, 0.0);
  write_wav(dir / "z.wav", z);
  EXPECT_EQ(read_wav(dir / "z.wav").samples, z.samples);
}

TEST(Wav, ClipsOutOfRange) {
  EXPECT_EQ(to_pcm16(2.0), 32767);
  EXPECT_EQ(to_pcm16(-2.0), -32768);
  EXPECT_EQ(to_pcm16(0.5), 16384);
}

TEST(Wav, MalformedFilesAreFileErrors) {
  const auto dir = testing::fresh_dir("wav_bad");
  write_wav(dir / "ok.wav", testing::random_wave(100, 8000, 3));
  std::ifstream in(dir / "ok.wav", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream(dir / "trunc.wav", std::ios::binary) << bytes.substr(0, 100);
  EXPECT_THROW(read_wav(dir / "trunc.wav"), FileError);
  std::ofstream(dir / "junk.wav", std::ios::binary) << "hello world, not audio";
  EXPECT_THROW(read_wav(dir / "junk.wav"), FileError);
  EXPECT_THROW(read_wav(dir / "missing.wav"), FileError);
  try {
    read_wav(dir / "ok.wav", 16000);
    FAIL();
  } catch (const FileError& e) {
    EXPECT_NE(std::string(e.what()).find("ok.wav"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("16000"), std::string::npos);
  }
}

CheckpointMeta meta() {
  CheckpointMeta m;
  m.stft = {512, 128};
  m.epoch = 12;
  m.val_sisnri_db = 3.25;
  return m;
}

TEST(Checkpoint, BitExactRoundTrip) {
  const auto dir = testing::fresh_dir("ckpt");
  const auto p = ModelParams<double>::initialized(ArchConfig::pulse(), 99);
  save_checkpoint(dir / "m.ckpt", p, meta());
  const Checkpoint c = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(c.params.arch, p.arch);
  EXPECT_EQ(c.params.rng_seed, 99u);
  EXPECT_EQ(c.meta.stft, meta().stft);
  EXPECT_EQ(c.meta.epoch, 12);
  EXPECT_EQ(c.meta.val_sisnri_db, 3.25);
  ASSERT_EQ(c.params.layers.size(), p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    EXPECT_EQ(c.params.layers[i].weight, p.layers[i].weight);
    EXPECT_EQ(c.params.layers[i].bias, p.layers[i].bias);
  }
  EXPECT_EQ(serialize_checkpoint(c.params, c.meta), serialize_checkpoint(p, meta()));

  // Float parameters widen exactly.
  const auto pf = p.cast<float>();
  const Checkpoint cf = parse_checkpoint(serialize_checkpoint(pf, meta()));
  EXPECT_EQ(cf.params.layers[3].weight, pf.layers[3].weight.cast<double>());
}

TEST(Checkpoint, AnyFlippedByteIsRejected) {
  const auto p = ModelParams<double>::initialized(ArchConfig::supervised(), 1);
  const auto bytes = serialize_checkpoint(p, meta());
  for (std::size_t pos : {std::size_t{0}, std::size_t{9}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x10;
    EXPECT_THROW(parse_checkpoint(bad), CheckpointError) << pos;
  }
  auto shortened = bytes;
  shortened.resize(bytes.size() - 9);
  EXPECT_THROW(parse_checkpoint(shortened), CheckpointError);
  EXPECT_THROW(parse_checkpoint({1, 2, 3}), CheckpointError);
  EXPECT_THROW(load_checkpoint(testing::fresh_dir("ckpt_none") / "nope.ckpt"), CheckpointError);
}

TEST(Config, ParsesKeyValueLines) {
  const ConfigMap m = parse_config("# comment\nepochs = 5\n\n  class_prior=0.6  # trailing\nloss = sigmoid\n");
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m.at("epochs"), "5");
  EXPECT_EQ(m.at("class_prior"), "0.6");
  EXPECT_THROW(parse_config("epochs 5\n"), InvalidArgument);
  EXPECT_THROW(parse_config("epochs =\n"), InvalidArgument);
}

TEST(Config, AppliesKnownKeysAndRejectsOthers) {
  ConfigMap m = parse_config("method = supervised\nepochs = 3\nclass_prior = 0.5\nhop = 64\nn_train = 9\n");
  TrainConfig t = TrainConfig::defaults_for(Method::pulse_nnpu);
  CorpusConfig c;
  apply_config(m, t);
  apply_config(m, c);
  require_consumed(m);
  EXPECT_EQ(t.method, Method::supervised);
  EXPECT_DOUBLE_EQ(t.learning_rate, 0.0032);
  EXPECT_EQ(t.epochs, 3);
  EXPECT_DOUBLE_EQ(t.risk.class_prior, 0.5);
  EXPECT_EQ(t.stft.hop, 64);
  EXPECT_EQ(c.n_train, 9);

  ConfigMap bad = parse_config("epochz = 3\n");
  apply_config(bad, t);
  try {
    require_consumed(bad);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("epochz"), std::string::npos);
  }
  ConfigMap nan = parse_config("epochs = many\n");
  EXPECT_THROW(apply_config(nan, t), InvalidArgument);
}

}  // namespace
}  // namespace pulse
