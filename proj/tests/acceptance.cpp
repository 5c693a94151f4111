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

// Acceptance run: one PASS/FAIL line per criterion on stdout, details on
// stderr. Exit status is 0 only if every selected criterion passes.
//
//   acceptance [--only name[,name...]] [--work dir] [--epochs n] [--threads n]

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "pulse/cli.hpp"

namespace pulse {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Ablation on the toy corpus

struct Variant {
  std::string name;
  Method method;
  LossKind loss;
};

const Variant kVariants[] = {
    {"pulse", Method::pulse_nnpu, LossKind::weighted_sigmoid},
    {"pulse_unweighted", Method::pulse_nnpu, LossKind::sigmoid},
    {"pulse_upu", Method::pulse_upu, LossKind::weighted_sigmoid},
    {"supervised", Method::supervised, LossKind::weighted_sigmoid},
};

struct AblationResult {
  std::map<std::string, std::vector<double>> test_db;           // per seed
  std::map<std::string, std::vector<EpochRecord>> histories;    // all seeds, concatenated
  double seconds = 0.0;
};

AblationResult run_ablation(const fs::path& work, int epochs, int threads) {
  const auto t0 = Clock::now();
  const fs::path corpus = work / "corpus";
  fs::remove_all(corpus);
  CorpusConfig cc;  // 200/40/60 clips, 8 kHz, 1 s
  build_corpus(cc, corpus, threads);

  AblationResult res;
  for (const Variant& v : kVariants) {
    CorpusReader reader(corpus);
    TrainConfig cfg = TrainConfig::defaults_for(v.method);
    cfg.risk.loss = v.loss;
    cfg.epochs = epochs;
    cfg.threads = threads;
    const TrainingData data = load_training_data(reader, cfg.method, cfg.stft, threads);
    const std::vector<PairedClip> test = load_pairs(reader, Split::test);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      cfg.seed = seed;
      RunOptions opts;
      opts.out_dir = work / "runs" / (v.name + "-seed" + std::to_string(seed));
      opts.log = &std::cerr;
      const auto r = run_training<float>(data, cfg, opts);
      const EvalReport rep = evaluate_pairs(r.best, std::span<const PairedClip>(test), cfg.stft, threads);
      // Diagnostics against labels derived from the clean clips.
      double predicted_p = 0.0, accuracy = 0.0;
      for (const PairedClip& c : test) {
        const LabelGrid pred = predict_labels(forward_clip(r.best, magnitude(stft(c.noisy, cfg.stft)), false));
        const LabelGrid truth =
            ground_truth_labels(magnitude(stft(c.clean, cfg.stft)), r.best.arch.receptive_field());
        predicted_p += static_cast<double>(std::count(pred.values().begin(), pred.values().end(), 1)) / pred.size();
        accuracy += label_accuracy(pred, truth);
      }
      std::cerr << v.name << " seed " << seed << ": best epoch " << r.best_epoch << ", test SI-SNRi "
                << rep.mean_improvement_db << " dB, predicted-P fraction " << predicted_p / test.size()
                << ", label accuracy " << accuracy / test.size() << "\n";
      res.test_db[v.name].push_back(rep.mean_improvement_db);
      auto& h = res.histories[v.name];
      h.insert(h.end(), r.history.begin(), r.history.end());
    }
  }
  res.seconds = seconds_since(t0);
  return res;
}

void check_ablation(const AblationResult& a, bool ordering, bool supervised, bool nonneg) {
  auto m = [&](const std::string& n) { return mean(a.test_db.at(n)); };
  const double full = m("pulse"), unweighted = m("pulse_unweighted"), upu = m("pulse_upu"), sup = m("supervised");
  std::cerr << "mean test SI-SNRi (dB): pulse " << full << ", unweighted " << unweighted << ", uPU " << upu
            << ", supervised " << sup << "\n";
  if (ordering) {
    report("ablation_weighted_beats_unweighted", full > unweighted,
           "PULSE " + fmt(full) + " dB > unweighted " + fmt(unweighted) + " dB");
    report("ablation_nnpu_not_below_upu", full >= upu, "PULSE " + fmt(full) + " dB >= uPU " + fmt(upu) + " dB");
    report("ablation_full_method_at_least_5db", full >= 5.0, "PULSE " + fmt(full) + " dB >= 5 dB");
    report("ablation_runtime", a.seconds <= 3600.0,
           fmt(a.seconds / 60.0, 3) + " min <= 60 min (" + std::to_string(default_thread_count()) + " cores)");
  }
  if (supervised)
    report("supervised_matches_pulse", sup >= full - 1.0,
           "supervised " + fmt(sup) + " dB >= PULSE " + fmt(full) + " - 1 dB");
  if (nonneg) {
    double nn_min = std::numeric_limits<double>::infinity();
    for (const char* n : {"pulse", "pulse_unweighted"})
      for (const auto& r : a.histories.at(n)) nn_min = std::min(nn_min, r.min_step_risk);
    report("nnpu_risk_non_negative", nn_min >= 0.0, "smallest logged nnPU step risk " + fmt(nn_min, 6) + " >= 0");
    double upu_min = std::numeric_limits<double>::infinity();
    for (const auto& r : a.histories.at("pulse_upu")) upu_min = std::min(upu_min, r.min_step_risk);
    report("upu_risk_goes_negative", upu_min < 0.0, "smallest logged uPU step risk " + fmt(upu_min, 6) + " < 0");
  }
}

// ---------------------------------------------------------------------------
// Risk check

void check_unbiased() {
  const auto t0 = Clock::now();
  RiskCheckConfig c;
  c.prior = 0.7;
  c.samples = 100000;
  c.resamples = 1000;
  c.n_positive = 500;
  c.n_unlabeled = 500;
  const RiskCheckReport r = run_risk_check(c);
  const double secs = seconds_since(t0);
  const double dev = std::abs(r.upu_mean - r.pn_risk);
  std::cerr << "risk-check: " << r.to_json().dump() << "\n"
            << "  deviation in uPU-only standard errors: " << dev / r.upu_stderr << "\n";
  report("upu_unbiased", r.unbiased,
         "|" + fmt(r.upu_mean, 6) + " - " + fmt(r.pn_risk, 6) + "| = " + fmt(dev, 3) + " <= 3 x " +
             fmt(r.combined_stderr, 3));
  report("upu_unbiased_runtime", secs <= 120.0, fmt(secs, 3) + " s <= 120 s");
}

// ---------------------------------------------------------------------------
// Gradient check on a reduced network

void check_gradient() {
  const auto t0 = Clock::now();
  ArchConfig arch;
  arch.layers = {{1, 4, 3}, {4, 4, 3}, {4, 1, 3}};
  auto m = ModelParams<double>::initialized(arch, 21);
  for (auto& l : m.layers) l.bias.array() += 0.05;  // keep units away from the ReLU kink

  std::mt19937_64 rng(22);
  std::exponential_distribution<double> mag(1.0);
  std::vector<Grid<double>> clips;
  for (int i = 0; i < 4; ++i) {
    Grid<double> g(10, 12);
    for (double& v : g.values()) v = mag(rng);
    clips.push_back(std::move(g));
  }
  const Grid<double>* p[] = {&clips[0], &clips[1]};
  const Grid<double>* u[] = {&clips[2], &clips[3]};
  RiskConfig rc;
  rc.loss = LossKind::weighted_sigmoid;
  const DropoutKey key{5, 6};
  auto objective = [&](const ModelParams<double>& mm) {
    const auto o = pu_objective_gradient(mm, std::span<const Grid<double>* const>(p),
                                         std::span<const Grid<double>* const>(u), rc, true, key, 1,
                                         PuGradientMode::full);
    return o;
  };
  const auto analytic = objective(m).grads;

  std::vector<std::pair<std::size_t, Eigen::Index>> all;
  for (std::size_t l = 0; l < m.layers.size(); ++l)
    for (Eigen::Index k = 0; k < m.layers[l].weight.size() + m.layers[l].bias.size(); ++k) all.push_back({l, k});
  std::shuffle(all.begin(), all.end(), rng);
  auto param = [](auto& layer, Eigen::Index k) -> auto& {
    return k < layer.weight.size() ? layer.weight.data()[k] : layer.bias[k - layer.weight.size()];
  };

  double worst = 0.0;
  const double h = 1e-6;
  for (int probe = 0; probe < 20; ++probe) {
    const auto [l, k] = all[static_cast<std::size_t>(probe)];
    double& w = param(m.layers[l], k);
    const double saved = w;
    w = saved + h;
    const double up = objective(m).risk.total;
    w = saved - h;
    const double down = objective(m).risk.total;
    w = saved;
    const double fd = (up - down) / (2 * h);
    const double an = param(const_cast<ConvLayer<double>&>(analytic[l]), k);
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-12});
    std::cerr << "  probe layer " << l << " index " << k << ": analytic " << an << " fd " << fd << " rel " << rel
              << "\n";
    worst = std::max(worst, rel);
  }
  const double secs = seconds_since(t0);
  report("gradient_check", worst <= 1e-4, "max relative error over 20 probes " + fmt(worst, 3) + " <= 1e-4");
  report("gradient_check_runtime", secs <= 30.0, fmt(secs, 3) + " s <= 30 s");
}

// ---------------------------------------------------------------------------
// Patch-wise and clip-wise scores

void check_patch_clip() {
  std::mt19937_64 rng(31);
  std::exponential_distribution<double> mag(1.0);
  double worst = 0.0;
  for (int model = 0; model < 5; ++model) {
    auto m = ModelParams<double>::initialized(ArchConfig::pulse(), 100 + model);
    for (auto& l : m.layers) l.bias.array() += 0.02;
    const int rf = m.arch.receptive_field();
    for (int spec = 0; spec < 5; ++spec) {
      Grid<double> g(12 + 3 * spec, 20 + 5 * model);
      for (double& v : g.values()) v = mag(rng);
      const ScoreMap clip = forward_clip(m, g, false);
      for (int t = 0; t < g.frames(); ++t)
        for (int f = 0; f < g.bins(); ++f)
          worst = std::max(worst, std::abs(clip(t, f) - forward_patch(m, extract_patch(g, t, f, rf), false)));
    }
  }
  report("patch_clip_equivalence", worst <= 1e-10, "max |clip - patch| " + fmt(worst, 3) + " <= 1e-10");
}

// ---------------------------------------------------------------------------
// STFT round trip

void check_stft() {
  const StftConfig cfg{1024, 256};
  Waveform w;
  w.sample_rate = 16000;
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int i = 0; i < 2 * w.sample_rate; ++i) w.samples.push_back(g(rng));
  const Waveform r = istft(stft(w, cfg));
  // Interior: away from the first and last frame_len samples.
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 1024; i + 1024 < w.size(); ++i) {
    err += (r.samples[i] - w.samples[i]) * (r.samples[i] - w.samples[i]);
    ref += w.samples[i] * w.samples[i];
  }
  const double rel = std::sqrt(err / ref);
  report("stft_round_trip", r.size() == w.size() && rel <= 1e-6, "interior relative RMS " + fmt(rel, 3) + " <= 1e-6");
}

// ---------------------------------------------------------------------------
// Weighted loss identity

void check_weighted_identity() {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> wd(0.0, 10.0), fd(-20.0, 20.0);
  std::bernoulli_distribution yd(0.5);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double w = wd(rng), f = fd(rng);
    const int y = yd(rng) ? 1 : -1;
    const double loss = weighted_sigmoid_loss({f, y, w});
    const double direct = std::abs(0.5 * (y + 1) * w - sigmoid(f) * w);
    worst = std::max(worst, std::abs(loss - direct));
  }
  report("weighted_loss_identity", worst <= 1e-12, "max deviation over 1e4 triples " + fmt(worst, 3) + " <= 1e-12");
}

// ---------------------------------------------------------------------------
// SI-SNR

void check_si_snr() {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> s(8000), n(8000);
  for (auto& v : s) v = g(rng);
  for (auto& v : n) v = 0.5 * g(rng);
  std::vector<double> est(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) est[i] = s[i] + n[i];
  const double base = si_snr(s, est);
  double scale_dev = 0.0;
  for (double k : {1e-3, 0.1, 3.0, 250.0}) {
    std::vector<double> e = est;
    for (double& v : e) v *= k;
    scale_dev = std::max(scale_dev, std::abs(si_snr(s, e) - base));
  }
  report("si_snr_scale_invariance", scale_dev <= 1e-9, "max change " + fmt(scale_dev, 3) + " dB <= 1e-9 dB");

  // s + e with e orthogonal to s and 10 dB below it.
  const double proj = dot(n, s) / energy(s);
  for (std::size_t i = 0; i < n.size(); ++i) n[i] -= proj * s[i];
  const double gain = std::sqrt(energy(s) / (10.0 * energy(n)));
  for (std::size_t i = 0; i < s.size(); ++i) est[i] = s[i] + gain * n[i];
  const double ten = si_snr(s, est);
  report("si_snr_constructed_10db", std::abs(ten - 10.0) <= 1e-6, fmt(ten, 12) + " dB within 1e-6 of 10 dB");

  Waveform clean{s, 8000}, noisy{est, 8000};
  const double zero = si_snr_improvement(clean, noisy, noisy);
  report("si_snr_improvement_identity", zero == 0.0, "improvement with enhanced = noisy is " + fmt(zero, 3));
}

// ---------------------------------------------------------------------------
// End-to-end determinism through the CLI

void check_determinism(const fs::path& work, int threads) {
  std::string metrics[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = work / ("determinism-" + std::to_string(run));
    fs::remove_all(dir);
    std::ostringstream out, err;
    const std::string t = "--threads=" + std::to_string(threads);
    int code = run_cli({t, "synth-data", "--out", (dir / "data").string(), "--seed", "7"}, {out, err});
    if (code == kExitOk)
      code = run_cli({t, "train", "--data", (dir / "data").string(), "--out", (dir / "run").string(), "--epochs",
                      "2", "--seed", "7", "--quiet"},
                     {out, err});
    if (code != kExitOk) {
      report("determinism", false, "run " + std::to_string(run) + " exited with " + std::to_string(code) + ": " +
                                       err.str());
      return;
    }
    metrics[run] = slurp(dir / "run" / kMetricsName);
  }
  report("determinism", !metrics[0].empty() && metrics[0] == metrics[1],
         "metrics files " + std::string(metrics[0] == metrics[1] ? "byte-identical" : "differ") + " (" +
             std::to_string(metrics[0].size()) + " bytes)");
}

}  // namespace
}  // namespace pulse

int main(int argc, char** argv) {
  using namespace pulse;
  CLI::App app{"PULSE acceptance checks"};
  std::vector<std::string> only;
  std::string work = "acceptance-work";
  int epochs = 4;
  int threads = default_thread_count();
  app.add_option("--only", only, "Run only these checks")->delimiter(',');
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--epochs", epochs, "Training epochs per ablation run");
  app.add_option("--threads", threads);
  CLI11_PARSE(app, argc, argv);

  auto want = [&](const std::string& n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
  const fs::path wd(work);
  fs::create_directories(wd);

  try {
    if (want("weighted_loss_identity")) check_weighted_identity();
    if (want("si_snr")) check_si_snr();
    if (want("stft_round_trip")) check_stft();
    if (want("patch_clip")) check_patch_clip();
    if (want("gradient_check")) check_gradient();
    if (want("upu_unbiased")) check_unbiased();
    if (want("determinism")) check_determinism(wd, threads);
    const bool ord = want("ablation"), sup = want("supervised"), nn = want("nnpu_non_negative");
    if (ord || sup || nn) check_ablation(run_ablation(wd, epochs, threads), ord, sup, nn);
  } catch (const std::exception& e) {
    std::cout << "FAIL aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
