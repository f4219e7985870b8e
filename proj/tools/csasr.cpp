// tools/csasr.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Single executable for the toolkit: corpus synthesis, mixing, training,
// decoding, evaluation and gradient verification. Exit codes: 0 success,
// 1 I/O or runtime failure (and failed gradcheck), 2 flag errors.
// Diagnostics go to stderr; data goes to files or stdout.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "csasr/gradcheck.hpp"
#include "csasr/io.hpp"
#include "csasr/metrics.hpp"
#include "csasr/parallel.hpp"
#include "csasr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Configuration files
//
// --config accepts either a key = value file or JSON (a runspec.json from a
// previous run re-runs that configuration). Precedence: command-line flags
// beat config values beat defaults. Unknown keys are ignored so one runspec
// can be replayed by the subcommand that wrote it.
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw csasr::Error("cannot open config file: " + path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    json j = json::parse(in);
    if (!j.is_object()) throw csasr::Error("config must be a JSON object: " + path);
    return j;
  }
  json j = json::object();
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw csasr::Error("config line is not key = value: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    j[key] = value;
  }
  return j;
}

std::string key_of(const std::string& flag) {
  std::string key = flag.substr(flag.find_first_not_of('-'));
  for (char& c : key)
    if (c == '-') c = '_';
  return key;
}

bool config_has(const CLI::App& cmd, const json& cfg, const std::string& flag) {
  return cmd.count(flag) == 0 && cfg.contains(key_of(flag));
}

void maybe_set(const CLI::App& cmd, const json& cfg, const std::string& flag, std::string& v) {
  if (config_has(cmd, cfg, flag)) v = cfg.at(key_of(flag)).get<std::string>();
}

void maybe_set(const CLI::App& cmd, const json& cfg, const std::string& flag, bool& v) {
  if (!config_has(cmd, cfg, flag)) return;
  const json& x = cfg.at(key_of(flag));
  if (x.is_boolean())
    v = x.get<bool>();
  else {
    const std::string s = x.get<std::string>();
    v = s == "true" || s == "1" || s == "yes";
  }
}

template <typename T>
void maybe_set(const CLI::App& cmd, const json& cfg, const std::string& flag, T& v) {
  if (!config_has(cmd, cfg, flag)) return;
  const json& x = cfg.at(key_of(flag));
  if (x.is_number())
    v = x.get<T>();
  else
    v = static_cast<T>(std::stold(x.get<std::string>()));
}

void write_runspec(const fs::path& out_dir, const ordered_json& spec) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "runspec.json", std::ios::trunc);
  out << spec.dump(2) << "\n";
}

std::vector<std::string> manifest_texts(const fs::path& manifest) {
  std::vector<std::string> texts;
  for (const csasr::ManifestRecord& r : csasr::read_manifest_records(manifest))
    texts.push_back(r.transcript);
  return texts;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
  std::size_t n_utts = 50;
  double cs_fraction = 0.5;
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
};

int run_synth(const SynthOpts& o) {
  const csasr::Vocabulary vocab = csasr::synth_default_vocabulary();
  const std::uint64_t corpus_seed = csasr::Rng(o.seed).substream("corpus").seed();
  auto [real, tts] = csasr::synth_corpus(vocab, o.n_utts, o.cs_fraction, corpus_seed);

  const fs::path out(o.out);
  fs::create_directories(out);
  csasr::write_corpus(out / "real", real, vocab);
  csasr::write_corpus(out / "tts", tts, vocab);

  ordered_json spec;
  spec["subcommand"] = "synth";
  spec["n_utts"] = o.n_utts;
  spec["cs_fraction"] = o.cs_fraction;
  spec["seed"] = o.seed;
  spec["out"] = o.out;
  write_runspec(out, spec);
  std::cerr << "synth: wrote " << real.size() << " real + " << tts.size() << " tts utterances to "
            << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// mix
// ---------------------------------------------------------------------------

struct MixOpts {
  std::string tts;
  std::string real;
  std::string out;
  std::size_t batch_size = 32;
  double alpha = 0.4;
  double beta = 0.4;
  std::uint64_t seed = 1;
  std::string config;
};

int run_mix(const MixOpts& o) {
  std::vector<std::string> texts = manifest_texts(o.tts);
  for (const std::string& t : manifest_texts(o.real)) texts.push_back(t);
  const csasr::Vocabulary vocab = csasr::build_vocabulary(texts);

  const std::vector<csasr::Utterance> tts_corpus = csasr::load_manifest(o.tts, vocab);
  const std::vector<csasr::Utterance> real_corpus = csasr::load_manifest(o.real, vocab);

  csasr::MixupParams params{o.alpha, o.beta, o.seed};
  csasr::Rng rng = csasr::Rng(o.seed).substream("mixup");

  std::vector<csasr::Utterance> mixed_corpus;
  ordered_json log_lines = ordered_json::array();
  for (std::size_t start = 0; start < tts_corpus.size(); start += o.batch_size) {
    const std::size_t end = std::min(start + o.batch_size, tts_corpus.size());
    std::vector<csasr::Utterance> batch(tts_corpus.begin() + static_cast<std::ptrdiff_t>(start),
                                        tts_corpus.begin() + static_cast<std::ptrdiff_t>(end));
    for (csasr::MixedUtterance& m : csasr::mix_batches(batch, real_corpus, params, rng)) {
      csasr::Utterance u;
      u.id = m.source_tts_id + "_mix";
      u.kind = csasr::SampleKind::kTts;
      u.features = std::move(m.features);
      u.transcript = std::move(m.transcript);
      mixed_corpus.push_back(std::move(u));
      ordered_json entry;
      entry["id"] = mixed_corpus.back().id;
      entry["lambda_mix"] = m.lambda_mix;
      entry["source_tts_id"] = m.source_tts_id;
      entry["source_real_id"] = m.source_real_id;
      log_lines.push_back(std::move(entry));
    }
  }

  const fs::path out(o.out);
  fs::create_directories(out);
  csasr::write_corpus(out, mixed_corpus, vocab);
  {
    std::ofstream log(out / "mixup_log.jsonl", std::ios::trunc);
    for (const auto& entry : log_lines) log << entry.dump() << "\n";
  }

  ordered_json spec;
  spec["subcommand"] = "mix";
  spec["tts"] = o.tts;
  spec["real"] = o.real;
  spec["batch_size"] = o.batch_size;
  spec["alpha"] = o.alpha;
  spec["beta"] = o.beta;
  spec["seed"] = o.seed;
  spec["out"] = o.out;
  write_runspec(out, spec);
  std::cerr << "mix: wrote " << mixed_corpus.size() << " mixed utterances to " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string real;
  std::string tts;
  std::string out;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 0.3;
  double grad_clip = 5.0;
  std::size_t hidden = 16;
  std::uint64_t seed = 1;
  bool mixup = false;
  double tts_ratio = 0.0;
  bool cs_bias = false;
  double lambda_prime = 0.25;
  double lambda_mtl = 0.7;
  double alpha = 0.4;
  double beta = 0.4;
  std::string finetune;
  bool freeze_encoder = false;
  std::string interleave = "round_robin";
  int threads = 1;
  std::string config;
};

int run_train(const TrainOpts& o) {
  csasr::Vocabulary vocab;
  if (!o.finetune.empty()) {
    vocab = csasr::load_checkpoint(o.finetune).vocab();
  } else {
    std::vector<std::string> texts = manifest_texts(o.real);
    if (!o.tts.empty())
      for (const std::string& t : manifest_texts(o.tts)) texts.push_back(t);
    vocab = csasr::build_vocabulary(texts);
  }

  const std::vector<csasr::Utterance> real_corpus = csasr::load_manifest(o.real, vocab);
  std::vector<csasr::Utterance> tts_corpus;
  if (!o.tts.empty()) tts_corpus = csasr::load_manifest(o.tts, vocab);

  csasr::TrainConfig cfg;
  cfg.batch_size = o.batch_size;
  cfg.epochs = o.epochs;
  cfg.lr = o.lr;
  cfg.grad_clip = o.grad_clip;
  cfg.seed = o.seed;
  cfg.mode = o.finetune.empty() ? csasr::TrainMode::kScratch : csasr::TrainMode::kFinetune;
  cfg.checkpoint_path = o.finetune;
  cfg.freeze_encoder = o.freeze_encoder;
  cfg.mixup_enabled = o.mixup;
  cfg.tts_ratio = o.tts_ratio;
  cfg.hidden = o.hidden;
  cfg.threads = o.threads;
  cfg.interleave = o.interleave == "block" ? csasr::InterleavePolicy::kBlock
                                           : csasr::InterleavePolicy::kRoundRobin;
  cfg.mixup = csasr::MixupParams{o.alpha, o.beta, o.seed};
  cfg.loss = csasr::LossConfig::from_vocabulary(vocab);
  cfg.loss.lambda_mtl = o.lambda_mtl;
  cfg.loss.lambda_prime = o.lambda_prime;
  cfg.loss.reward_enabled = o.cs_bias;

  csasr::TrainResult result =
      csasr::train_run(cfg, vocab, real_corpus, tts_corpus.empty() ? nullptr : &tts_corpus);

  for (const csasr::EpochStats& e : result.history)
    std::cerr << "epoch " << e.epoch << ": loss " << e.loss_total << " (ctc " << e.loss_ctc
              << ", att " << e.loss_att << "), reward " << e.reward_ctc + e.reward_att << "\n";

  const fs::path out(o.out);
  fs::create_directories(out);
  csasr::save_checkpoint(out / "model.ckpt", result.model);
  csasr::write_history_csv(out / "history.csv", result.history);

  ordered_json spec;
  spec["subcommand"] = "train";
  spec["real"] = o.real;
  spec["tts"] = o.tts;
  spec["epochs"] = o.epochs;
  spec["batch_size"] = o.batch_size;
  spec["lr"] = o.lr;
  spec["grad_clip"] = o.grad_clip;
  spec["hidden"] = o.hidden;
  spec["seed"] = o.seed;
  spec["mixup"] = o.mixup;
  spec["tts_ratio"] = o.tts_ratio;
  spec["cs_bias"] = o.cs_bias;
  spec["lambda_prime"] = o.lambda_prime;
  spec["lambda_mtl"] = o.lambda_mtl;
  spec["alpha"] = o.alpha;
  spec["beta"] = o.beta;
  spec["finetune"] = o.finetune;
  spec["freeze_encoder"] = o.freeze_encoder;
  spec["interleave"] = o.interleave;
  spec["threads"] = o.threads;
  spec["out"] = o.out;
  write_runspec(out, spec);
  return 0;
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

struct DecodeOpts {
  std::string model;
  std::string data;
  std::string out;
  std::size_t beam_width = 20;
  int threads = 1;
  std::uint64_t seed = 1;
  std::string config;
};

int run_decode(const DecodeOpts& o) {
  const csasr::ToyModel model = csasr::load_checkpoint(o.model);
  const std::vector<csasr::Utterance> corpus = csasr::load_manifest(o.data, model.vocab());

  std::vector<csasr::Hypothesis> hyps(corpus.size());
  csasr::parallel_for(corpus.size(), o.threads, [&](std::size_t i) {
    const csasr::Transcript t = model.decode(corpus[i].features, o.beam_width);
    hyps[i] = {corpus[i].id, csasr::transcript_to_text(model.vocab(), t)};
  });

  const fs::path out(o.out);
  fs::create_directories(out);
  csasr::write_hypotheses(out / "hyps.jsonl", hyps);

  ordered_json spec;
  spec["subcommand"] = "decode";
  spec["model"] = o.model;
  spec["data"] = o.data;
  spec["beam_width"] = o.beam_width;
  spec["threads"] = o.threads;
  spec["seed"] = o.seed;
  spec["out"] = o.out;
  write_runspec(out, spec);
  std::cerr << "decode: wrote " << hyps.size() << " hypotheses to " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string refs;
  std::string hyps;
  std::string out;
  bool cs_double_count = false;
  bool cs_per_utterance = false;
  std::string config;
};

int run_eval(const EvalOpts& o) {
  const std::vector<csasr::Hypothesis> refs = csasr::read_hypotheses(o.refs);
  const std::vector<csasr::Hypothesis> hyp_list = csasr::read_hypotheses(o.hyps);
  std::map<std::string, std::string> by_id;
  for (const csasr::Hypothesis& h : hyp_list) by_id[h.id] = h.text;

  std::vector<std::string> ids, ref_texts, hyp_texts;
  for (const csasr::Hypothesis& r : refs) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw csasr::Error("no hypothesis for id " + r.id);
    ids.push_back(r.id);
    ref_texts.push_back(r.text);
    hyp_texts.push_back(it->second);
  }

  csasr::CsWerOptions cs_opts;
  cs_opts.count_doubly_adjacent_twice = o.cs_double_count;
  cs_opts.per_utterance_average = o.cs_per_utterance;
  const csasr::EvalReport report = csasr::evaluate_corpus(ids, ref_texts, hyp_texts, cs_opts);

  ordered_json j;
  j["wer"] = report.wer;
  j["cer"] = report.cer;
  if (report.cs_wer.has_value())
    j["cs_wer"] = *report.cs_wer;
  else
    j["cs_wer"] = nullptr;
  j["m"] = report.m;
  j["n"] = report.n;
  j["per_utterance"] = ordered_json::array();
  for (const csasr::UtteranceEval& u : report.per_utterance) {
    ordered_json e;
    e["id"] = u.id;
    e["wer"] = u.word.rate();
    e["cer"] = u.chars.rate();
    e["m"] = u.m;
    e["n"] = u.n;
    j["per_utterance"].push_back(std::move(e));
  }

  std::cout << j.dump(2) << "\n";
  const fs::path out(o.out);
  fs::create_directories(out);
  {
    std::ofstream f(out / "report.json", std::ios::trunc);
    f << j.dump(2) << "\n";
  }

  ordered_json spec;
  spec["subcommand"] = "eval";
  spec["refs"] = o.refs;
  spec["hyps"] = o.hyps;
  spec["cs_double_count"] = o.cs_double_count;
  spec["cs_per_utterance"] = o.cs_per_utterance;
  spec["out"] = o.out;
  write_runspec(out, spec);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckOpts {
  std::size_t trials = 100;
  std::uint64_t seed = 3;
  std::string out;
  std::string config;
};

int run_gradcheck_cmd(const GradcheckOpts& o) {
  const csasr::GradCheckReport report = csasr::run_gradcheck(o.trials, o.seed);

  ordered_json j;
  j["trials"] = report.trials;
  j["seed"] = report.seed;
  j["checks"] = ordered_json::array();
  for (const csasr::GradCheckResult& c : report.checks) {
    ordered_json e;
    e["name"] = c.name;
    e["trials"] = c.trials;
    e["max_rel_err"] = c.max_rel_err;
    e["tol"] = c.tol;
    e["pass"] = c.pass;
    j["checks"].push_back(std::move(e));
  }
  j["pass"] = report.pass;

  std::cout << j.dump(2) << "\n";
  if (!o.out.empty()) {
    const fs::path out(o.out);
    fs::create_directories(out);
    {
      std::ofstream f(out / "gradcheck.json", std::ios::trunc);
      f << j.dump(2) << "\n";
    }
    ordered_json spec;
    spec["subcommand"] = "gradcheck";
    spec["trials"] = o.trials;
    spec["seed"] = o.seed;
    spec["out"] = o.out;
    write_runspec(out, spec);
  }
  return report.pass ? 0 : 1;
}

}  // namespace

namespace {

int run_main(int argc, char** argv) {
  CLI::App app{"csasr: TTS-augmented code-switched ASR toolkit"};
  app.require_subcommand(1);

  SynthOpts synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic real/tts corpus pair");
  synth_cmd->add_option("--n-utts", synth.n_utts, "utterances per corpus");
  synth_cmd->add_option("--cs-fraction", synth.cs_fraction,
                        "fraction of code-switched TTS transcripts")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--seed", synth.seed, "master seed");
  synth_cmd->add_option("--out", synth.out, "output directory");
  synth_cmd->add_option("--config", synth.config, "key=value or JSON config file");

  MixOpts mix;
  CLI::App* mix_cmd = app.add_subcommand("mix", "mix a TTS corpus against real speech");
  mix_cmd->add_option("--tts", mix.tts, "TTS manifest");
  mix_cmd->add_option("--real", mix.real, "real-speech manifest");
  mix_cmd->add_option("--out", mix.out, "output directory");
  mix_cmd->add_option("--batch-size", mix.batch_size, "utterances per mixing batch")
      ->check(CLI::PositiveNumber);
  mix_cmd->add_option("--alpha", mix.alpha, "Beta shape alpha")->check(CLI::PositiveNumber);
  mix_cmd->add_option("--beta", mix.beta, "Beta shape beta")->check(CLI::PositiveNumber);
  mix_cmd->add_option("--seed", mix.seed, "master seed");
  mix_cmd->add_option("--config", mix.config, "key=value or JSON config file");

  TrainOpts train;
  CLI::App* train_cmd = app.add_subcommand("train", "train the toy model");
  train_cmd->add_option("--real", train.real, "real-speech manifest");
  train_cmd->add_option("--tts", train.tts, "TTS manifest");
  train_cmd->add_option("--out", train.out, "output directory");
  train_cmd->add_option("--epochs", train.epochs, "training epochs");
  train_cmd->add_option("--batch-size", train.batch_size, "batch size")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train.lr, "SGD learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--grad-clip", train.grad_clip, "global-norm clip (<=0 disables)");
  train_cmd->add_option("--hidden", train.hidden, "encoder hidden units")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train.seed, "master seed");
  train_cmd->add_flag("--mixup", train.mixup, "mix TTS batches with real speech");
  train_cmd->add_option("--tts-ratio", train.tts_ratio, "TTS batches per real batch")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--cs-bias", train.cs_bias, "enable the code-switching reward");
  train_cmd->add_option("--lambda-prime", train.lambda_prime, "reward coefficient")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lambda-mtl", train.lambda_mtl, "CTC weight in the multitask loss")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--alpha", train.alpha, "mixup Beta alpha")->check(CLI::PositiveNumber);
  train_cmd->add_option("--beta", train.beta, "mixup Beta beta")->check(CLI::PositiveNumber);
  train_cmd->add_option("--finetune", train.finetune, "checkpoint to finetune from");
  train_cmd->add_flag("--freeze-encoder", train.freeze_encoder,
                      "keep encoder parameters fixed");
  train_cmd->add_option("--interleave", train.interleave, "TTS batch placement")
      ->check(CLI::IsMember({"round_robin", "block"}));
  train_cmd->add_option("--threads", train.threads, "worker threads (1 = reference mode)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--config", train.config, "key=value or JSON config file");

  DecodeOpts decode;
  CLI::App* decode_cmd = app.add_subcommand("decode", "CTC decoding of a manifest");
  decode_cmd->add_option("--model", decode.model, "checkpoint");
  decode_cmd->add_option("--data", decode.data, "manifest to decode");
  decode_cmd->add_option("--out", decode.out, "output directory");
  decode_cmd->add_option("--beam-width", decode.beam_width, "1 = greedy, otherwise beam")
      ->check(CLI::PositiveNumber);
  decode_cmd->add_option("--threads", decode.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  decode_cmd->add_option("--seed", decode.seed, "master seed (echoed; decoding is deterministic)");
  decode_cmd->add_option("--config", decode.config, "key=value or JSON config file");

  EvalOpts eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score hypotheses against references");
  eval_cmd->add_option("--refs", eval.refs, "reference manifest or JSONL");
  eval_cmd->add_option("--hyps", eval.hyps, "hypothesis JSONL");
  eval_cmd->add_option("--out", eval.out, "output directory");
  eval_cmd->add_flag("--cs-double-count", eval.cs_double_count,
                     "count a word flanked by two switch points twice in M");
  eval_cmd->add_flag("--cs-per-utterance", eval.cs_per_utterance,
                     "average CS-WER per utterance instead of pooling N and M");
  eval_cmd->add_option("--config", eval.config, "key=value or JSON config file");

  GradcheckOpts gradcheck;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "verify analytic gradients against finite differences");
  gradcheck_cmd->add_option("--trials", gradcheck.trials, "random instances per check")
      ->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--seed", gradcheck.seed, "master seed");
  gradcheck_cmd->add_option("--out", gradcheck.out, "output directory (optional)");
  gradcheck_cmd->add_option("--config", gradcheck.config, "key=value or JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth_cmd->parsed()) {
      if (!synth.config.empty()) {
        const json cfg = load_config_file(synth.config);
        maybe_set(*synth_cmd, cfg, "--n-utts", synth.n_utts);
        maybe_set(*synth_cmd, cfg, "--cs-fraction", synth.cs_fraction);
        maybe_set(*synth_cmd, cfg, "--seed", synth.seed);
        maybe_set(*synth_cmd, cfg, "--out", synth.out);
      }
      if (synth.out.empty()) throw CLI::RequiredError("--out");
      if (synth.cs_fraction < 0.0 || synth.cs_fraction > 1.0)
        throw CLI::ValidationError("--cs-fraction", "must lie in [0, 1]");
      return run_synth(synth);
    }
    if (mix_cmd->parsed()) {
      if (!mix.config.empty()) {
        const json cfg = load_config_file(mix.config);
        maybe_set(*mix_cmd, cfg, "--tts", mix.tts);
        maybe_set(*mix_cmd, cfg, "--real", mix.real);
        maybe_set(*mix_cmd, cfg, "--out", mix.out);
        maybe_set(*mix_cmd, cfg, "--batch-size", mix.batch_size);
        maybe_set(*mix_cmd, cfg, "--alpha", mix.alpha);
        maybe_set(*mix_cmd, cfg, "--beta", mix.beta);
        maybe_set(*mix_cmd, cfg, "--seed", mix.seed);
      }
      if (mix.tts.empty()) throw CLI::RequiredError("--tts");
      if (mix.real.empty()) throw CLI::RequiredError("--real");
      if (mix.out.empty()) throw CLI::RequiredError("--out");
      return run_mix(mix);
    }
    if (train_cmd->parsed()) {
      if (!train.config.empty()) {
        const json cfg = load_config_file(train.config);
        maybe_set(*train_cmd, cfg, "--real", train.real);
        maybe_set(*train_cmd, cfg, "--tts", train.tts);
        maybe_set(*train_cmd, cfg, "--out", train.out);
        maybe_set(*train_cmd, cfg, "--epochs", train.epochs);
        maybe_set(*train_cmd, cfg, "--batch-size", train.batch_size);
        maybe_set(*train_cmd, cfg, "--lr", train.lr);
        maybe_set(*train_cmd, cfg, "--grad-clip", train.grad_clip);
        maybe_set(*train_cmd, cfg, "--hidden", train.hidden);
        maybe_set(*train_cmd, cfg, "--seed", train.seed);
        maybe_set(*train_cmd, cfg, "--mixup", train.mixup);
        maybe_set(*train_cmd, cfg, "--tts-ratio", train.tts_ratio);
        maybe_set(*train_cmd, cfg, "--cs-bias", train.cs_bias);
        maybe_set(*train_cmd, cfg, "--lambda-prime", train.lambda_prime);
        maybe_set(*train_cmd, cfg, "--lambda-mtl", train.lambda_mtl);
        maybe_set(*train_cmd, cfg, "--alpha", train.alpha);
        maybe_set(*train_cmd, cfg, "--beta", train.beta);
        maybe_set(*train_cmd, cfg, "--finetune", train.finetune);
        maybe_set(*train_cmd, cfg, "--freeze-encoder", train.freeze_encoder);
        maybe_set(*train_cmd, cfg, "--interleave", train.interleave);
        maybe_set(*train_cmd, cfg, "--threads", train.threads);
      }
      if (train.real.empty()) throw CLI::RequiredError("--real");
      if (train.out.empty()) throw CLI::RequiredError("--out");
      return run_train(train);
    }
    if (decode_cmd->parsed()) {
      if (!decode.config.empty()) {
        const json cfg = load_config_file(decode.config);
        maybe_set(*decode_cmd, cfg, "--model", decode.model);
        maybe_set(*decode_cmd, cfg, "--data", decode.data);
        maybe_set(*decode_cmd, cfg, "--out", decode.out);
        maybe_set(*decode_cmd, cfg, "--beam-width", decode.beam_width);
        maybe_set(*decode_cmd, cfg, "--threads", decode.threads);
        maybe_set(*decode_cmd, cfg, "--seed", decode.seed);
      }
      if (decode.model.empty()) throw CLI::RequiredError("--model");
      if (decode.data.empty()) throw CLI::RequiredError("--data");
      if (decode.out.empty()) throw CLI::RequiredError("--out");
      return run_decode(decode);
    }
    if (eval_cmd->parsed()) {
      if (!eval.config.empty()) {
        const json cfg = load_config_file(eval.config);
        maybe_set(*eval_cmd, cfg, "--refs", eval.refs);
        maybe_set(*eval_cmd, cfg, "--hyps", eval.hyps);
        maybe_set(*eval_cmd, cfg, "--out", eval.out);
        maybe_set(*eval_cmd, cfg, "--cs-double-count", eval.cs_double_count);
        maybe_set(*eval_cmd, cfg, "--cs-per-utterance", eval.cs_per_utterance);
      }
      if (eval.refs.empty()) throw CLI::RequiredError("--refs");
      if (eval.hyps.empty()) throw CLI::RequiredError("--hyps");
      if (eval.out.empty()) throw CLI::RequiredError("--out");
      return run_eval(eval);
    }
    if (gradcheck_cmd->parsed()) {
      if (!gradcheck.config.empty()) {
        const json cfg = load_config_file(gradcheck.config);
        maybe_set(*gradcheck_cmd, cfg, "--trials", gradcheck.trials);
        maybe_set(*gradcheck_cmd, cfg, "--seed", gradcheck.seed);
        maybe_set(*gradcheck_cmd, cfg, "--out", gradcheck.out);
      }
      return run_gradcheck_cmd(gradcheck);
    }
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
