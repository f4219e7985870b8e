// csasr/train.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_TRAIN_HPP
#define CSASR_TRAIN_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csasr/loss.hpp"
#include "csasr/mixup.hpp"
#include "csasr/model.hpp"

namespace csasr {

enum class TrainMode { kScratch, kFinetune };

/// How TTS (or mixed) batches are interleaved with real batches within an
/// epoch. Round-robin spreads them evenly by ratio; block appends them after
/// all real batches.
enum class InterleavePolicy { kRoundRobin, kBlock };

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  double lr = 0.3;
  double grad_clip = 5.0;  // global-norm clip; <= 0 disables
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::kScratch;
  std::string checkpoint_path;  // required for kFinetune
  bool freeze_encoder = false;
  bool mixup_enabled = false;
  double tts_ratio = 0.0;  // TTS batches per real batch
  std::size_t hidden = 16;
  int threads = 1;
  InterleavePolicy interleave = InterleavePolicy::kRoundRobin;
  MixupParams mixup;
  LossConfig loss;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss_total = 0.0;
  double loss_ctc = 0.0;
  double loss_att = 0.0;
  double reward_ctc = 0.0;
  double reward_att = 0.0;
};

using History = std::vector<EpochStats>;

void write_history_csv(const std::filesystem::path& path, const History& history);

/// Sortagrad: sort ascending by frame count (ties by id), chunk into batches,
/// then shuffle the batch order with the given seed. Within-batch order is
/// preserved. Returns index lists into the corpus.
std::vector<std::vector<std::size_t>> sortagrad_batches(const std::vector<Utterance>& corpus,
                                                        std::size_t batch_size,
                                                        std::uint64_t seed);

/// Swappable parameter-update rule.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(ToyModel& model, const Gradients& grads) = 0;
};

/// Plain SGD with a fixed learning rate. Parameters whose trainable flag is
/// off are left bit-identical.
class SgdOptimizer : public Optimizer {
 public:
  explicit SgdOptimizer(double lr) : lr_(lr) {}
  void step(ToyModel& model, const Gradients& grads) override;

 private:
  double lr_;
};

struct TrainResult {
  ToyModel model;
  History history;
};

/// Full training loop: sortagrad batching with per-epoch batch shuffling,
/// TTS/mixup scheduling by ratio, optional frozen encoder, per-batch SGD.
/// `vocab` must match the corpora's encoding (and the checkpoint's when
/// finetuning).
TrainResult train_run(const TrainConfig& cfg, const Vocabulary& vocab,
                      const std::vector<Utterance>& real_corpus,
                      const std::vector<Utterance>* tts_corpus);

// ---------------------------------------------------------------------------
// Synthetic desk-scale corpora
// ---------------------------------------------------------------------------

/// Vocabulary used by the synthetic-corpus generator: a-z plus a small
/// Devanagari letter set.
Vocabulary synth_default_vocabulary();

/// Generates paired corpora: `real` is monolingual (per-utterance single
/// script, both scripts across the corpus, noise sigma 0.1) and `tts` has
/// cs_fraction code-switched transcripts, lower noise (0.02) and a constant
/// channel offset standing in for the TTS/real distribution gap. Every
/// character renders as its fixed seeded prototype vector (dims = 8) repeated
/// for 2-4 frames.
std::pair<std::vector<Utterance>, std::vector<Utterance>> synth_corpus(const Vocabulary& vocab,
                                                                       std::size_t n_utts,
                                                                       double cs_fraction,
                                                                       std::uint64_t seed);

}  // namespace csasr

#endif  // CSASR_TRAIN_HPP
