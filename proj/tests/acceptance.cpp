// tests/acceptance.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Release gate: one pass/fail line per criterion, nonzero exit on any
// failure. Usage: acceptance <path-to-csasr-binary> <path-to-test-data>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "csasr/gradcheck.hpp"
#include "csasr/io.hpp"
#include "csasr/metrics.hpp"
#include "csasr/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace csasr;

namespace {

std::string g_bin;
fs::path g_data_dir;
fs::path g_work;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_cli(const std::string& args) {
  const std::string cmd = g_bin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      out[fs::relative(entry.path(), root).string()] = file_bytes(entry.path());
  return out;
}

bool criterion(const std::string& tag, const std::string& what,
               const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
    ok = false;
  }
  std::cout << tag << (ok ? " PASS " : " FAIL ") << what
            << (detail.empty() ? "" : " [" + detail + "]") << "\n";
  return ok;
}

// ---------------------------------------------------------------------------

bool a1_ctc_oracle(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(2026);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 1 + rng.uniform_below(8);   // up to 8 frames
    const std::size_t V = 2 + rng.uniform_below(3);   // up to 4 symbols
    std::vector<std::int32_t> labels;
    for (;;) {
      labels.clear();
      const std::size_t L = rng.uniform_below(5);     // up to 4 labels
      for (std::size_t i = 0; i < L; ++i)
        labels.push_back(1 + static_cast<std::int32_t>(rng.uniform_below(V - 1)));
      std::size_t repeats = 0;
      for (std::size_t i = 0; i + 1 < labels.size(); ++i)
        if (labels[i] == labels[i + 1]) ++repeats;
      if (labels.size() + repeats <= T) break;
    }
    const Mat probs = oracles::random_probs(rng, T, V);
    Transcript t;
    t.chars = labels;
    t.scripts.assign(labels.size(), Script::kNeutral);
    const double loss = ctc_loss(PosteriorSequence::from_probs(probs), t, 0).first;
    const double brute = oracles::brute_ctc_loss(probs, labels, 0);
    worst = std::max(worst, std::fabs(loss - brute) / std::max(1.0, std::fabs(brute)));
  }
  const double elapsed = seconds_since(start);
  std::ostringstream os;
  os << "200 instances, max rel err " << worst << ", " << elapsed << " s";
  detail = os.str();
  return worst <= 1e-9 && elapsed < 10.0;
}

bool a2_gradients(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  const GradCheckReport report = run_gradcheck(100, 7);
  const double elapsed = seconds_since(start);
  std::ostringstream os;
  bool ok = report.pass && report.checks.size() == 5;
  for (const GradCheckResult& c : report.checks) {
    os << c.name << "=" << c.max_rel_err << " ";
    ok = ok && c.pass;
  }
  os << elapsed << " s";
  detail = os.str();
  return ok && elapsed < 60.0;
}

bool a3_mixup_distribution(std::string& detail) {
  Rng rng(404);
  const MixupParams params;  // alpha = beta = 0.4
  double sum_underlying = 0.0;
  for (int i = 0; i < 100000; ++i) {
    Rng probe = rng.substream("draw", static_cast<std::uint64_t>(i));
    const double underlying = sample_beta(params, probe);
    Rng replay = rng.substream("draw", static_cast<std::uint64_t>(i));
    const double folded = sample_lambda_mix(params, replay);
    if (!(folded >= 0.5 && folded <= 1.0)) {
      detail = "lambda_mix out of range";
      return false;
    }
    if (folded != std::max(underlying, 1.0 - underlying)) {
      detail = "fold mismatch";
      return false;
    }
    sum_underlying += underlying;
  }
  const double mean = sum_underlying / 100000.0;

  // Convexity of mix_pair on random pairs.
  Rng frng(405);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t dims = 1 + frng.uniform_below(8);
    Utterance tts, real;
    tts.kind = SampleKind::kTts;
    real.kind = SampleKind::kReal;
    tts.features = FeatureMatrix(1 + frng.uniform_below(10), dims);
    real.features = FeatureMatrix(1 + frng.uniform_below(10), dims);
    for (float& x : tts.features.data) x = static_cast<float>(3.0 * frng.normal());
    for (float& x : real.features.data) x = static_cast<float>(3.0 * frng.normal());
    const double lam = sample_lambda_mix(params, frng);
    const MixedUtterance mixed = mix_pair(tts, real, lam);
    const std::size_t aligned = std::min(tts.features.frames, real.features.frames);
    for (std::size_t t = 0; t < aligned; ++t) {
      for (std::size_t d = 0; d < dims; ++d) {
        const float lo = std::min(tts.features.at(t, d), real.features.at(t, d));
        const float hi = std::max(tts.features.at(t, d), real.features.at(t, d));
        if (mixed.features.at(t, d) < lo || mixed.features.at(t, d) > hi) {
          detail = "convexity violated";
          return false;
        }
      }
    }
  }

  std::ostringstream os;
  os << "1e5 draws in range, mean(lambda) = " << mean << ", 1000 mixes convex";
  detail = os.str();
  return std::fabs(mean - 0.5) <= 0.01;
}

bool a4_metric_ground_truth(std::string& detail) {
  const auto doc = nlohmann::json::parse(file_bytes(g_data_dir / "metrics_worksheet.json"));
  std::vector<std::string> ids, refs, hyps;
  for (const auto& u : doc.at("utterances")) {
    ids.push_back(u.at("id").get<std::string>());
    refs.push_back(u.at("ref").get<std::string>());
    hyps.push_back(u.at("hyp").get<std::string>());
  }
  const EvalReport report = evaluate_corpus(ids, refs, hyps);

  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < report.per_utterance.size(); ++i) {
    const auto& u = doc.at("utterances")[i];
    const UtteranceEval& got = report.per_utterance[i];
    const auto& w = u.at("word");
    const auto& c = u.at("char");
    const bool ok =
        got.word.sub == w.at("sub").get<std::size_t>() &&
        got.word.ins == w.at("ins").get<std::size_t>() &&
        got.word.del == w.at("del").get<std::size_t>() &&
        got.word.n_ref == w.at("n_ref").get<std::size_t>() &&
        got.chars.sub == c.at("sub").get<std::size_t>() &&
        got.chars.ins == c.at("ins").get<std::size_t>() &&
        got.chars.del == c.at("del").get<std::size_t>() &&
        got.chars.n_ref == c.at("n_ref").get<std::size_t>() &&
        got.m == u.at("m").get<std::size_t>() && got.n == u.at("n").get<std::size_t>();
    if (!ok) {
      ++mismatches;
      std::cerr << "  worksheet mismatch at " << ids[i] << "\n";
    }
  }

  const auto& corpus = doc.at("corpus");
  const double expected_wer = static_cast<double>(corpus.at("word_errors").get<std::size_t>()) /
                              static_cast<double>(corpus.at("word_n_ref").get<std::size_t>());
  const double expected_cer = static_cast<double>(corpus.at("char_errors").get<std::size_t>()) /
                              static_cast<double>(corpus.at("char_n_ref").get<std::size_t>());
  const double expected_cswer =
      1.0 - static_cast<double>(corpus.at("n").get<std::size_t>()) /
                static_cast<double>(corpus.at("m").get<std::size_t>());

  bool ok = mismatches == 0;
  ok = ok && std::fabs(report.wer - expected_wer) <= 1e-12;
  ok = ok && std::fabs(report.wer - corpus.at("wer").get<double>()) <= 1e-12;
  ok = ok && std::fabs(report.cer - expected_cer) <= 1e-12;
  ok = ok && std::fabs(report.cer - corpus.at("cer").get<double>()) <= 1e-12;
  ok = ok && report.cs_wer.has_value();
  ok = ok && report.m == corpus.at("m").get<std::size_t>();
  ok = ok && report.n == corpus.at("n").get<std::size_t>();
  if (report.cs_wer.has_value()) {
    ok = ok && std::fabs(*report.cs_wer - expected_cswer) <= 1e-12;
    ok = ok && std::fabs(*report.cs_wer - corpus.at("cs_wer").get<double>()) <= 1e-12;
  }

  // cs_wer(refs, refs) == 0 on the same corpus.
  std::vector<Words> ref_words;
  for (const std::string& r : refs) ref_words.push_back(split_words(r));
  ok = ok && cs_wer(ref_words, ref_words).value == 0.0;

  // A monolingual corpus has no switch points.
  bool raised = false;
  try {
    const std::vector<Words> mono = {{"घर", "दिन"}, {"hello", "time"}};
    cs_wer(mono, mono);
  } catch (const NoSwitchPoints&) {
    raised = true;
  }
  ok = ok && raised;

  std::ostringstream os;
  os << "20 utterances, wer=" << report.wer << " cer=" << report.cer
     << " cs_wer=" << (report.cs_wer ? *report.cs_wer : -1.0);
  detail = os.str();
  return ok;
}

bool a5_training_sanity(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  const Vocabulary vocab = synth_default_vocabulary();
  auto [real, tts] = synth_corpus(vocab, 50, 0.5, 11);
  (void)tts;
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.epochs = 20;
  cfg.seed = 11;
  cfg.loss = LossConfig::from_vocabulary(vocab);
  const TrainResult result = train_run(cfg, vocab, real, nullptr);
  const double first = result.history.front().loss_total;
  const double last = result.history.back().loss_total;
  const double elapsed = seconds_since(start);
  std::ostringstream os;
  os << "epoch1 " << first << " -> epoch20 " << last << ", " << elapsed << " s";
  detail = os.str();
  return last <= 0.5 * first && elapsed < 300.0;
}

bool a6_cs_bias_direction(std::string& detail) {
  const Vocabulary vocab = synth_default_vocabulary();
  auto [real_all, tts_all] = synth_corpus(vocab, 90, 0.5, 11);
  const std::vector<Utterance> real(real_all.begin(), real_all.begin() + 50);
  const std::vector<Utterance> tts(tts_all.begin(), tts_all.begin() + 50);
  std::vector<Utterance> heldout;
  for (std::size_t i = 50; i < tts_all.size(); ++i) {
    bool dev = false, lat = false;
    for (Script s : tts_all[i].transcript.scripts) {
      dev = dev || s == Script::kDevanagari;
      lat = lat || s == Script::kLatin;
    }
    if (dev && lat) heldout.push_back(tts_all[i]);
  }

  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.epochs = 20;
  cfg.seed = 11;
  cfg.mixup_enabled = true;
  cfg.tts_ratio = 1.0;
  cfg.loss = LossConfig::from_vocabulary(vocab);

  cfg.loss.reward_enabled = false;
  const TrainResult plain = train_run(cfg, vocab, real, &tts);
  cfg.loss.reward_enabled = true;
  cfg.loss.lambda_prime = 0.25;
  const TrainResult biased = train_run(cfg, vocab, real, &tts);

  // Mean per-utterance CS reward over the encoder posterior on held-out data.
  auto mean_reward = [&](const ToyModel& model) {
    double sum = 0.0;
    for (const Utterance& u : heldout) {
      const ToyModel::Forward f = model.forward(u.features, nullptr);
      sum += cs_reward(f.ctc, vocab.english_set()).first;
    }
    return sum / static_cast<double>(heldout.size());
  };
  const double reward_plain = mean_reward(plain.model);
  const double reward_biased = mean_reward(biased.model);

  auto decode_cs_wer = [&](const ToyModel& model) {
    std::vector<Words> refs, hyps;
    for (const Utterance& u : heldout) {
      refs.push_back(split_words(transcript_to_text(vocab, u.transcript)));
      hyps.push_back(split_words(transcript_to_text(vocab, model.decode(u.features, 20))));
    }
    return cs_wer(refs, hyps).value;
  };
  const double cswer_plain = decode_cs_wer(plain.model);
  const double cswer_biased = decode_cs_wer(biased.model);

  std::ostringstream os;
  os << heldout.size() << " held-out CS utts; mean R " << reward_plain << " -> "
     << reward_biased << "; CS-WER " << cswer_plain << " -> " << cswer_biased;
  detail = os.str();
  return reward_biased > reward_plain && cswer_biased <= cswer_plain;
}

bool a7_frozen_encoder(std::string& detail) {
  const Vocabulary vocab = synth_default_vocabulary();
  auto [real, tts] = synth_corpus(vocab, 20, 0.5, 13);
  (void)tts;

  TrainConfig pre;
  pre.batch_size = 16;
  pre.epochs = 2;
  pre.seed = 13;
  pre.loss = LossConfig::from_vocabulary(vocab);
  const TrainResult pretrained = train_run(pre, vocab, real, nullptr);
  const fs::path ckpt = g_work / "a7.ckpt";
  save_checkpoint(ckpt, pretrained.model);

  auto encoder_bytes = [](const ToyModel& model) {
    std::string bytes;
    for (const Tensor& t : model.tensors())
      if (ToyModel::is_encoder_tensor(t.name))
        bytes.append(reinterpret_cast<const char*>(t.data.data()),
                     t.data.size() * sizeof(double));
    return bytes;
  };
  const std::string before = encoder_bytes(load_checkpoint(ckpt));

  TrainConfig ft = pre;
  ft.mode = TrainMode::kFinetune;
  ft.checkpoint_path = ckpt.string();
  ft.epochs = 3;
  ft.freeze_encoder = true;
  const TrainResult frozen = train_run(ft, vocab, real, nullptr);
  ft.freeze_encoder = false;
  const TrainResult thawed = train_run(ft, vocab, real, nullptr);

  const bool frozen_same = encoder_bytes(frozen.model) == before;
  const bool thawed_diff = encoder_bytes(thawed.model) != before;
  detail = std::string("frozen ") + (frozen_same ? "bit-identical" : "CHANGED") +
           ", unfrozen " + (thawed_diff ? "changed" : "UNCHANGED");
  return frozen_same && thawed_diff;
}

bool a8_reproducibility(std::string& detail) {
  const fs::path root = g_work / "a8";
  fs::create_directories(root);
  const std::string data = (root / "data").string();

  struct Step {
    std::string name;
    std::string args;
    fs::path out;
  };
  const std::vector<Step> steps = {
      {"synth", "synth --n-utts 12 --cs-fraction 1.0 --seed 5 --out " + data, root / "data"},
      {"mix",
       "mix --tts " + data + "/tts/manifest.jsonl --real " + data +
           "/real/manifest.jsonl --batch-size 4 --seed 5 --out " + (root / "mixed").string(),
       root / "mixed"},
      {"train",
       "train --real " + data + "/real/manifest.jsonl --tts " + data +
           "/tts/manifest.jsonl --mixup --tts-ratio 1.0 --epochs 2 --batch-size 8 --hidden 6 "
           "--seed 5 --threads 1 --out " + (root / "run").string(),
       root / "run"},
      {"decode",
       "decode --model " + (root / "run" / "model.ckpt").string() + " --data " + data +
           "/tts/manifest.jsonl --beam-width 5 --threads 1 --out " + (root / "dec").string(),
       root / "dec"},
      {"eval",
       "eval --refs " + data + "/tts/manifest.jsonl --hyps " +
           (root / "dec" / "hyps.jsonl").string() + " --out " + (root / "ev").string(),
       root / "ev"},
  };

  for (const Step& step : steps) {
    if (run_cli(step.args) != 0) {
      detail = step.name + " failed";
      return false;
    }
  }
  std::map<std::string, std::map<std::string, std::string>> snapshot;
  for (const Step& step : steps) snapshot[step.name] = tree_bytes(step.out);

  // Re-run every step in place (same out dirs) and compare bytes; then also
  // replay train purely from its runspec.
  for (const Step& step : steps) {
    if (run_cli(step.args) != 0) {
      detail = step.name + " failed on rerun";
      return false;
    }
  }
  for (const Step& step : steps) {
    if (tree_bytes(step.out) != snapshot[step.name]) {
      detail = step.name + " artifacts differ across reruns";
      return false;
    }
  }

  const std::string replay_out = (root / "run_replay").string();
  if (run_cli("train --config " + (root / "run" / "runspec.json").string() + " --out " +
              replay_out) != 0) {
    detail = "runspec replay failed";
    return false;
  }
  auto replay = tree_bytes(root / "run_replay");
  auto original = snapshot["train"];
  replay.erase("runspec.json");
  original.erase("runspec.json");  // differs only in the out path
  if (replay != original) {
    detail = "runspec replay artifacts differ";
    return false;
  }

  detail = "synth/mix/train/decode/eval byte-identical across reruns and runspec replay";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <csasr-binary> <data-dir>\n";
    return 2;
  }
  g_bin = argv[1];
  g_data_dir = argv[2];
  g_work = fs::temp_directory_path() / ("csasr_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_work);

  bool all = true;
  all &= criterion("A1", "CTC forward-backward matches brute-force path enumeration (1e-9)",
                   a1_ctc_oracle);
  all &= criterion("A2", "analytic gradients match central finite differences (1e-4 / 1e-3)",
                   a2_gradients);
  all &= criterion("A3", "mixup coefficient distribution and Eq-level convexity bounds",
                   a3_mixup_distribution);
  all &= criterion("A4", "metrics match the hand-worked 20-utterance corpus (1e-12)",
                   a4_metric_ground_truth);
  all &= criterion("A5", "20-epoch baseline training halves the mean loss", a5_training_sanity);
  all &= criterion("A6", "CS-bias raises held-out CS reward without hurting CS-WER",
                   a6_cs_bias_direction);
  all &= criterion("A7", "frozen-encoder finetuning keeps encoder bits unchanged",
                   a7_frozen_encoder);
  all &= criterion("A8", "CLI runs are byte-identical across reruns and runspec replay",
                   a8_reproducibility);

  std::error_code ec;
  fs::remove_all(g_work, ec);
  return all ? 0 : 1;
}
