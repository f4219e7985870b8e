// csasr/train.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#include "csasr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "csasr/parallel.hpp"

namespace csasr {

void write_history_csv(const std::filesystem::path& path, const History& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << "epoch,loss_total,loss_ctc,loss_att,reward_ctc,reward_att\n";
  char buf[64];
  auto fmt = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  for (const EpochStats& e : history) {
    out << e.epoch << ',' << fmt(e.loss_total) << ',' << fmt(e.loss_ctc) << ','
        << fmt(e.loss_att) << ',' << fmt(e.reward_ctc) << ',' << fmt(e.reward_att) << "\n";
  }
}

std::vector<std::vector<std::size_t>> sortagrad_batches(const std::vector<Utterance>& corpus,
                                                        std::size_t batch_size,
                                                        std::uint64_t seed) {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (corpus[a].features.frames != corpus[b].features.frames)
      return corpus[a].features.frames < corpus[b].features.frames;
    return corpus[a].id < corpus[b].id;
  });

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, order.size());
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }

  // Fisher-Yates over batch order; within-batch order stays sorted.
  Rng rng(seed);
  for (std::size_t i = batches.size(); i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i + 1));
    std::swap(batches[i], batches[j]);
  }
  return batches;
}

void SgdOptimizer::step(ToyModel& model, const Gradients& grads) {
  std::vector<Tensor>& tensors = model.tensors();
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    if (!tensors[ti].trainable) continue;
    for (std::size_t k = 0; k < tensors[ti].data.size(); ++k)
      tensors[ti].data[k] -= lr_ * grads[ti][k];
  }
}

namespace {

/// A batch entry: features plus labels, owning mixed features when needed.
struct Sample {
  const FeatureMatrix* features;
  const Transcript* labels;
};

struct SampleResult {
  Gradients grads;
  LossOutput loss;
};

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

TrainResult train_run(const TrainConfig& cfg, const Vocabulary& vocab,
                      const std::vector<Utterance>& real_corpus,
                      const std::vector<Utterance>* tts_corpus) {
  if (real_corpus.empty()) throw Error("real corpus is empty");
  const bool needs_tts = cfg.mixup_enabled || cfg.tts_ratio > 0.0;
  if (needs_tts && (tts_corpus == nullptr || tts_corpus->empty())) throw MissingTTSCorpus();

  Rng master(cfg.seed);
  ToyModel model = [&]() {
    if (cfg.mode == TrainMode::kFinetune) {
      if (cfg.checkpoint_path.empty()) throw MissingCheckpoint("(no checkpoint path)");
      ToyModel m = load_checkpoint(cfg.checkpoint_path);
      if (!m.vocab().same_symbols(vocab))
        throw Error("checkpoint vocabulary does not match the corpus vocabulary");
      return m;
    }
    Rng init = master.substream("init");
    return ToyModel(vocab, real_corpus.front().features.dims, cfg.hidden, init);
  }();
  if (cfg.freeze_encoder) model.set_encoder_trainable(false);

  SgdOptimizer optimizer(cfg.lr);
  Rng mix_rng = master.substream("mixup");
  History history;

  const std::size_t n_tensors = model.tensors().size();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto real_batches = sortagrad_batches(
        real_corpus, cfg.batch_size, master.substream("shuffle-real", epoch).seed());

    std::vector<std::vector<std::size_t>> tts_batches;
    std::size_t tts_target = 0;
    if (needs_tts) {
      tts_batches = sortagrad_batches(*tts_corpus, cfg.batch_size,
                                      master.substream("shuffle-tts", epoch).seed());
      tts_target = static_cast<std::size_t>(
          std::llround(cfg.tts_ratio * static_cast<double>(real_batches.size())));
    }

    // Schedule: real batches in order, TTS batches spread by ratio
    // (round-robin) or appended at the end (block).
    struct Slot {
      bool tts;
      std::size_t index;
    };
    std::vector<Slot> schedule;
    std::size_t tts_next = 0;
    if (cfg.interleave == InterleavePolicy::kRoundRobin) {
      std::size_t err = 0;
      for (std::size_t r = 0; r < real_batches.size(); ++r) {
        schedule.push_back({false, r});
        err += tts_target;
        while (err >= real_batches.size() && tts_next < tts_target) {
          schedule.push_back({true, tts_next++});
          err -= real_batches.size();
        }
      }
    } else {
      for (std::size_t r = 0; r < real_batches.size(); ++r) schedule.push_back({false, r});
    }
    while (tts_next < tts_target) schedule.push_back({true, tts_next++});

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t n_samples = 0;

    for (const Slot& slot : schedule) {
      // Materialize the batch.
      std::vector<MixedUtterance> mixed;
      std::vector<Sample> batch;
      if (!slot.tts) {
        for (std::size_t idx : real_batches[slot.index])
          batch.push_back({&real_corpus[idx].features, &real_corpus[idx].transcript});
      } else {
        const auto& indices = tts_batches[slot.index % tts_batches.size()];
        if (cfg.mixup_enabled) {
          std::vector<Utterance> tts_batch;
          tts_batch.reserve(indices.size());
          for (std::size_t idx : indices) tts_batch.push_back((*tts_corpus)[idx]);
          mixed = mix_batches(tts_batch, real_corpus, cfg.mixup, mix_rng);
          for (const MixedUtterance& m : mixed) batch.push_back({&m.features, &m.transcript});
        } else {
          for (std::size_t idx : indices)
            batch.push_back({&(*tts_corpus)[idx].features, &(*tts_corpus)[idx].transcript});
        }
      }

      // Forward/backward per sample, reduced in index order.
      std::vector<SampleResult> results(batch.size());
      parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
        const Sample& s = batch[i];
        ToyModel::Forward fwd = model.forward(*s.features, s.labels);
        SampleResult& r = results[i];
        r.loss = cs_bias_loss(fwd.ctc, fwd.att, *s.labels, cfg.loss);
        r.grads = model.zero_gradients();
        model.backward(*s.features, fwd, r.loss.grad_ctc_logits, &r.loss.grad_att_logits,
                       r.grads);
      });

      Gradients grads = model.zero_gradients();
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (const SampleResult& r : results) {
        for (std::size_t ti = 0; ti < n_tensors; ++ti)
          for (std::size_t k = 0; k < grads[ti].size(); ++k) grads[ti][k] += r.grads[ti][k];
        stats.loss_total += r.loss.total;
        stats.loss_ctc += r.loss.l_ctc;
        stats.loss_att += r.loss.l_att;
        stats.reward_ctc += r.loss.r_ctc;
        stats.reward_att += r.loss.r_att;
        ++n_samples;
      }
      for (auto& g : grads)
        for (double& x : g) x *= inv;

      // Frozen tensors take no update; keep them out of the clip norm too.
      for (std::size_t ti = 0; ti < n_tensors; ++ti)
        if (!model.tensors()[ti].trainable) std::fill(grads[ti].begin(), grads[ti].end(), 0.0);
      if (cfg.grad_clip > 0.0) {
        const double norm = global_norm(grads);
        if (norm > cfg.grad_clip) {
          const double scale = cfg.grad_clip / norm;
          for (auto& g : grads)
            for (double& x : g) x *= scale;
        }
      }
      optimizer.step(model, grads);
    }

    const double inv_n = n_samples > 0 ? 1.0 / static_cast<double>(n_samples) : 0.0;
    stats.loss_total *= inv_n;
    stats.loss_ctc *= inv_n;
    stats.loss_att *= inv_n;
    stats.reward_ctc *= inv_n;
    stats.reward_att *= inv_n;
    history.push_back(stats);
  }

  return {std::move(model), std::move(history)};
}

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kSynthDims = 8;
constexpr double kRealNoise = 0.1;
constexpr double kTtsNoise = 0.02;
constexpr double kTtsChannelOffset = 0.5;

std::vector<std::int32_t> make_word(Rng& rng, const std::vector<std::int32_t>& pool) {
  const std::size_t len = 2 + static_cast<std::size_t>(rng.uniform_below(4));  // 2..5
  std::vector<std::int32_t> word;
  word.reserve(len);
  for (std::size_t i = 0; i < len; ++i)
    word.push_back(pool[static_cast<std::size_t>(rng.uniform_below(pool.size()))]);
  return word;
}

Transcript assemble(const Vocabulary& vocab, const std::vector<std::vector<std::int32_t>>& words) {
  Transcript t;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w > 0) t.chars.push_back(Vocabulary::kSpace);
    t.chars.insert(t.chars.end(), words[w].begin(), words[w].end());
  }
  t.scripts.reserve(t.chars.size());
  for (std::int32_t id : t.chars) t.scripts.push_back(vocab.script_at(id));
  return t;
}

FeatureMatrix render(const Transcript& t, const std::vector<std::vector<double>>& proto,
                     double noise_sigma, double offset, Rng& rng) {
  std::vector<std::size_t> durations;
  durations.reserve(t.size());
  std::size_t frames = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::size_t dur = 2 + static_cast<std::size_t>(rng.uniform_below(3));  // 2..4
    durations.push_back(dur);
    frames += dur;
  }
  FeatureMatrix m(frames, kSynthDims);
  std::size_t row = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::vector<double>& p = proto[static_cast<std::size_t>(t.chars[i])];
    for (std::size_t r = 0; r < durations[i]; ++r, ++row)
      for (std::size_t d = 0; d < kSynthDims; ++d)
        m.at(row, d) = static_cast<float>(p[d] + offset + noise_sigma * rng.normal());
  }
  return m;
}

}  // namespace

Vocabulary synth_default_vocabulary() {
  return build_vocabulary({"abcdefghijklmnopqrstuvwxyz", "क ग त न म र ल स द प"});
}

std::pair<std::vector<Utterance>, std::vector<Utterance>> synth_corpus(const Vocabulary& vocab,
                                                                       std::size_t n_utts,
                                                                       double cs_fraction,
                                                                       std::uint64_t seed) {
  if (!(cs_fraction >= 0.0 && cs_fraction <= 1.0))
    throw Error("cs_fraction must lie in [0, 1]");

  Rng root(seed);
  Rng proto_rng = root.substream("proto");
  std::vector<std::vector<double>> proto(static_cast<std::size_t>(vocab.size()));
  for (auto& p : proto) {
    p.resize(kSynthDims);
    for (double& x : p) x = proto_rng.normal();
  }

  std::vector<std::int32_t> dev_pool, lat_pool;
  for (std::int32_t i = Vocabulary::kNumReserved; i < vocab.size(); ++i) {
    if (vocab.script_at(i) == Script::kDevanagari) dev_pool.push_back(i);
    if (vocab.script_at(i) == Script::kLatin) lat_pool.push_back(i);
  }
  if (dev_pool.empty() || lat_pool.empty())
    throw Error("synthesis vocabulary needs both Devanagari and Latin letters");

  auto utt_id = [](const char* prefix, std::size_t u) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%05zu", prefix, u);
    return std::string(buf);
  };

  // Real corpus: monolingual utterances, both scripts across the corpus
  // (the two monolingual pools a baseline trains on).
  std::vector<Utterance> real;
  real.reserve(n_utts);
  for (std::size_t u = 0; u < n_utts; ++u) {
    Rng rng = root.substream("real", u + 1);
    const auto& pool = rng.uniform01() < 0.5 ? dev_pool : lat_pool;
    const std::size_t n_words = 2 + static_cast<std::size_t>(rng.uniform_below(5));  // 2..6
    std::vector<std::vector<std::int32_t>> words;
    for (std::size_t w = 0; w < n_words; ++w) words.push_back(make_word(rng, pool));
    Utterance utt;
    utt.id = utt_id("real", u);
    utt.kind = SampleKind::kReal;
    utt.transcript = assemble(vocab, words);
    utt.features = render(utt.transcript, proto, kRealNoise, 0.0, rng);
    real.push_back(std::move(utt));
  }

  // TTS corpus: cs_fraction of transcripts code-switch between the scripts;
  // rendering is cleaner but shifted by a constant channel offset.
  std::vector<Utterance> tts;
  tts.reserve(n_utts);
  for (std::size_t u = 0; u < n_utts; ++u) {
    Rng rng = root.substream("tts", u + 1);
    const bool code_switched = rng.uniform01() < cs_fraction;
    const std::size_t n_words = 2 + static_cast<std::size_t>(rng.uniform_below(5));
    std::vector<char> is_latin(n_words, 0);
    if (code_switched) {
      for (std::size_t w = 0; w < n_words; ++w) is_latin[w] = rng.uniform01() < 0.5 ? 1 : 0;
      // Guarantee at least one switch point.
      bool any_dev = false, any_lat = false;
      for (char x : is_latin) (x ? any_lat : any_dev) = true;
      if (!any_dev || !any_lat) {
        const std::size_t flip = static_cast<std::size_t>(rng.uniform_below(n_words));
        is_latin[flip] = !is_latin[flip];
      }
    } else {
      const char script = rng.uniform01() < 0.5 ? 1 : 0;
      std::fill(is_latin.begin(), is_latin.end(), script);
    }
    std::vector<std::vector<std::int32_t>> words;
    for (std::size_t w = 0; w < n_words; ++w)
      words.push_back(make_word(rng, is_latin[w] ? lat_pool : dev_pool));
    Utterance utt;
    utt.id = utt_id("tts", u);
    utt.kind = SampleKind::kTts;
    utt.transcript = assemble(vocab, words);
    utt.features = render(utt.transcript, proto, kTtsNoise, kTtsChannelOffset, rng);
    tts.push_back(std::move(utt));
  }

  return {std::move(real), std::move(tts)};
}

}  // namespace csasr
