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

// Command-line front end. Every subcommand prints exactly one JSON line on
// stdout; diagnostics go to stderr. Exit codes:
//
//   0  success
//   1  risk-check assertion failed
//   2  invalid flags or arguments
//   3  file or corpus I/O failure
//   4  numeric failure (non-finite risk, degenerate window)
//   5  checkpoint corrupted or incompatible

#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulse/checkpoint.hpp"
#include "pulse/config.hpp"
#include "pulse/corpus.hpp"
#include "pulse/enhance.hpp"
#include "pulse/error.hpp"
#include "pulse/parallel.hpp"
#include "pulse/riskcheck.hpp"
#include "pulse/train.hpp"
#include "pulse/wav.hpp"

namespace pulse {

enum ExitCode : int {
  kExitOk = 0,
  kExitAssertion = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitNumeric = 4,
  kExitCheckpoint = 5,
};

inline constexpr const char* kDataRootEnv = "PULSE_DATA_ROOT";

namespace detail {

inline std::filesystem::path data_root(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
  throw InvalidArgument(std::string("no corpus given: pass --data or set ") + kDataRootEnv);
}

inline std::vector<std::filesystem::path> wav_inputs(const std::filesystem::path& in) {
  namespace fs = std::filesystem;
  if (!fs::exists(in)) throw FileError(in.string(), "input does not exist");
  if (!fs::is_directory(in)) return {in};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(in))
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

template <class V, class F>
void override_if(const std::optional<V>& flag, F&& set) {
  if (flag) set(*flag);
}

}  // namespace detail

struct CliStreams {
  std::ostream& out;
  std::ostream& err;
};

inline int run_cli(std::vector<std::string> args, CliStreams io) {
  CLI::App app{"PU learning for speech enhancement", "pulse"};
  app.require_subcommand(1);
  int threads = default_thread_count();
  app.add_option("--threads", threads, "Worker threads (1 = serial)")->check(CLI::PositiveNumber);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Generate the synthetic corpus");
  std::string synth_out;
  std::optional<std::string> synth_config;
  std::optional<int> n_train, n_val, n_test, sample_rate;
  std::optional<double> clip_seconds, snr_lo, snr_hi;
  std::optional<std::string> signal_kind, noise_kind;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--config", synth_config, "key = value config file");
  synth->add_option("--n-train", n_train);
  synth->add_option("--n-val", n_val);
  synth->add_option("--n-test", n_test);
  synth->add_option("--sample-rate", sample_rate);
  synth->add_option("--clip-seconds", clip_seconds);
  synth->add_option("--snr-lo", snr_lo);
  synth->add_option("--snr-hi", snr_hi);
  synth->add_option("--signal-kind", signal_kind);
  synth->add_option("--noise-kind", noise_kind);
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Master seed (default 0)");

  // train
  auto* train = app.add_subcommand("train", "Train a classifier");
  std::optional<std::string> train_data, train_config, method, loss;
  std::string train_out;
  std::optional<int> epochs, batch_size, tile_frames, tile_bins;
  std::optional<double> lr, prior;
  std::uint64_t train_seed = 0;
  std::string precision = "float";
  bool quiet = false;
  train->add_option("--data", train_data, "Corpus directory (default $PULSE_DATA_ROOT)");
  train->add_option("--method", method, "pulse_nnpu | pulse_upu | supervised");
  train->add_option("--config", train_config, "key = value config file");
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--epochs", epochs);
  train->add_option("--batch-size", batch_size);
  train->add_option("--lr", lr);
  train->add_option("--loss", loss, "sigmoid | weighted_sigmoid");
  train->add_option("--prior", prior, "Class prior of the P class");
  train->add_option("--tile-frames", tile_frames);
  train->add_option("--tile-bins", tile_bins);
  auto* train_seed_opt = train->add_option("--seed", train_seed, "Seed (default 0)");
  train->add_option("--precision", precision, "float | double")->check(CLI::IsMember({"float", "double"}));
  train->add_flag("--quiet", quiet, "No progress on stderr");

  // enhance
  auto* enh = app.add_subcommand("enhance", "Enhance WAV files with a trained model");
  std::string enh_model, enh_in, enh_out;
  enh->add_option("--model", enh_model, "Checkpoint file or training directory")->required();
  enh->add_option("--in", enh_in, "WAV file or directory")->required();
  enh->add_option("--out", enh_out, "WAV file or directory")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "SI-SNRi of a model on a corpus split");
  std::string eval_model, eval_split = "test";
  std::optional<std::string> eval_data, eval_report;
  eval->add_option("--model", eval_model, "Checkpoint file or training directory")->required();
  eval->add_option("--data", eval_data, "Corpus directory (default $PULSE_DATA_ROOT)");
  eval->add_option("--split", eval_split, "train | val | test");
  eval->add_option("--report", eval_report, "Also write the report to this file");

  // risk-check
  auto* rc = app.add_subcommand("risk-check", "Monte Carlo check of the unbiased PU risk");
  RiskCheckConfig rcc;
  std::string scorer = "linear";
  rc->add_option("--pi", rcc.prior, "Class prior");
  rc->add_option("--samples", rcc.samples, "Labelled oracle sample size");
  rc->add_option("--resamples", rcc.resamples, "Number of (P, U) resamples");
  rc->add_option("--n-p", rcc.n_positive, "P points per resample");
  rc->add_option("--n-u", rcc.n_unlabeled, "U points per resample");
  rc->add_option("--seed", rcc.seed, "Seed (default 0)");
  rc->add_option("--scorer", scorer, "linear | overfit")->check(CLI::IsMember({"linear", "overfit"}));

  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help() << std::flush;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    io.err << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*synth) {
      CorpusConfig cfg;
      if (synth_config) {
        ConfigMap m = load_config(*synth_config);
        apply_config(m, cfg);
        require_consumed(m);
      }
      detail::override_if(n_train, [&](int v) { cfg.n_train = v; });
      detail::override_if(n_val, [&](int v) { cfg.n_val = v; });
      detail::override_if(n_test, [&](int v) { cfg.n_test = v; });
      detail::override_if(sample_rate, [&](int v) { cfg.sample_rate = v; });
      detail::override_if(clip_seconds, [&](double v) { cfg.clip_seconds = v; });
      detail::override_if(snr_lo, [&](double v) { cfg.snr_lo = v; });
      detail::override_if(snr_hi, [&](double v) { cfg.snr_hi = v; });
      detail::override_if(signal_kind, [&](const std::string& v) { cfg.signal_kind = parse_signal_kind(v); });
      detail::override_if(noise_kind, [&](const std::string& v) { cfg.noise_kind = parse_noise_kind(v); });
      if (synth_seed_opt->count() > 0 || !synth_config) cfg.seed = synth_seed;
      const Manifest manifest = build_corpus(cfg, synth_out, threads);
      const auto path = std::filesystem::path(synth_out) / kManifestName;
      io.out << nlohmann::json{{"manifest", path.string()}, {"records", manifest.size()}}.dump() << std::endl;
      return kExitOk;
    }

    if (*train) {
      TrainConfig cfg = TrainConfig::defaults_for(method ? parse_method(*method) : Method::pulse_nnpu);
      if (train_config) {
        ConfigMap m = load_config(*train_config);
        apply_config(m, cfg);
        require_consumed(m);
      }
      if (method && cfg.method != parse_method(*method)) {
        ConfigMap m{{"method", *method}};
        apply_config(m, cfg);
      }
      detail::override_if(epochs, [&](int v) { cfg.epochs = v; });
      detail::override_if(batch_size, [&](int v) { cfg.batch_size = v; });
      detail::override_if(lr, [&](double v) { cfg.learning_rate = v; });
      detail::override_if(loss, [&](const std::string& v) { cfg.risk.loss = parse_loss_kind(v); });
      detail::override_if(prior, [&](double v) { cfg.risk.class_prior = v; });
      detail::override_if(tile_frames, [&](int v) { cfg.tile_frames = v; });
      detail::override_if(tile_bins, [&](int v) { cfg.tile_bins = v; });
      if (train_seed_opt->count() > 0 || !train_config) cfg.seed = train_seed;
      cfg.threads = threads;
      cfg.validate();

      CorpusReader reader(detail::data_root(train_data));
      const TrainingData data = load_training_data(reader, cfg.method, cfg.stft, threads);
      RunOptions opts;
      opts.out_dir = train_out;
      if (!quiet) opts.log = &io.err;
      int best_epoch = 0;
      double best_val = 0.0;
      std::size_t rows = 0;
      if (precision == "double") {
        const auto r = run_training<double>(data, cfg, opts);
        best_epoch = r.best_epoch;
        best_val = r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_sisnri_db;
        rows = r.history.size();
      } else {
        const auto r = run_training<float>(data, cfg, opts);
        best_epoch = r.best_epoch;
        best_val = r.history[static_cast<std::size_t>(r.best_epoch - 1)].val_sisnri_db;
        rows = r.history.size();
      }
      const auto out = std::filesystem::path(train_out);
      io.out << nlohmann::json{{"method", to_string(cfg.method)},
                               {"epochs", rows},
                               {"best_epoch", best_epoch},
                               {"best_val_sisnri_db", best_val},
                               {"best_checkpoint", (out / checkpoint_name(best_epoch)).string()},
                               {"metrics", (out / kMetricsName).string()}}
                    .dump()
             << std::endl;
      return kExitOk;
    }

    if (*enh) {
      namespace fs = std::filesystem;
      // The checkpoint is loaded before anything is written.
      const Checkpoint ckpt = load_checkpoint(resolve_checkpoint(enh_model));
      const std::vector<fs::path> inputs = detail::wav_inputs(enh_in);
      const bool to_dir = fs::is_directory(enh_in);
      std::vector<Waveform> outputs(inputs.size());
      std::vector<Waveform> noisy(inputs.size());
      for (std::size_t i = 0; i < inputs.size(); ++i) noisy[i] = read_wav(inputs[i]);
      parallel_for(inputs.size(), threads, [&](std::size_t i) {
        outputs[i] = enhance_clip(ckpt.params, noisy[i], ckpt.meta.stft);
      });
      if (to_dir) {
        try {
          fs::create_directories(enh_out);
        } catch (const fs::filesystem_error& e) {
          throw FileError(enh_out, e.what());
        }
      }
      nlohmann::json written = nlohmann::json::array();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const fs::path dst = to_dir ? fs::path(enh_out) / inputs[i].filename() : fs::path(enh_out);
        write_wav(dst, outputs[i]);
        written.push_back(dst.string());
      }
      io.out << nlohmann::json{{"outputs", written}}.dump() << std::endl;
      return kExitOk;
    }

    if (*eval) {
      const Checkpoint ckpt = load_checkpoint(resolve_checkpoint(eval_model));
      CorpusReader reader(detail::data_root(eval_data));
      const EvalReport report = evaluate_corpus(ckpt.params, reader, parse_split(eval_split), ckpt.meta.stft, threads);
      const std::string line = report.to_json().dump();
      if (eval_report) {
        std::ofstream f(*eval_report, std::ios::trunc);
        f << line << '\n';
        if (!f) throw FileError(*eval_report, "cannot write report");
      }
      io.out << line << std::endl;
      return kExitOk;
    }

    if (*rc) {
      rcc.scorer = parse_scorer_kind(scorer);
      const RiskCheckReport rep = run_risk_check(rcc);
      // A fixed scorer must show no bias; a scorer fitted to U must still
      // leave every nnPU risk non-negative.
      const bool passed = rcc.scorer == ScorerKind::linear ? rep.unbiased : rep.nnpu_min >= 0.0;
      nlohmann::json j = rep.to_json();
      j["passed"] = passed;
      io.out << j.dump() << std::endl;
      if (!passed) io.err << "risk-check: assertion failed\n";
      return passed ? kExitOk : kExitAssertion;
    }
  } catch (const CheckpointError& e) {
    io.err << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const FileError& e) {
    io.err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const InvalidArgument& e) {
    io.err << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericFailure& e) {
    io.err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DegenerateWindow& e) {
    io.err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}

inline int run_cli(int argc, char** argv, CliStreams io) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(std::move(args), io);
}

}  // namespace pulse
