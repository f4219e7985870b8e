// csasr/gradcheck.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#include "csasr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "csasr/loss.hpp"
#include "csasr/model.hpp"
#include "csasr/rng.hpp"

namespace csasr {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kOpTol = 1e-4;
constexpr double kModelTol = 1e-3;

/// Relative error with a small absolute floor, so near-zero gradients do not
/// inflate the ratio past finite-difference noise.
double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-2});
  return std::fabs(analytic - numeric) / denom;
}

/// Max relative error between an analytic gradient and central differences
/// of `f` over every entry of `x`.
double check_grad(std::vector<double>& x, const std::vector<double>& analytic,
                  const std::function<double()>& f) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + kFdStep;
    const double up = f();
    x[i] = orig - kFdStep;
    const double down = f();
    x[i] = orig;
    const double numeric = (up - down) / (2.0 * kFdStep);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

Mat random_logits(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.5) {
  Mat m(rows, cols);
  for (double& x : m.v) x = scale * rng.normal();
  return m;
}

Transcript random_labels(Rng& rng, std::size_t len, std::int32_t vocab_size,
                         std::int32_t blank_index) {
  Transcript t;
  for (std::size_t i = 0; i < len; ++i) {
    std::int32_t c;
    do {
      c = static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(vocab_size)));
    } while (c == blank_index);
    t.chars.push_back(c);
    t.scripts.push_back(Script::kNeutral);
  }
  return t;
}

std::vector<std::int32_t> random_english_set(Rng& rng, std::int32_t vocab_size) {
  std::vector<std::int32_t> set;
  for (std::int32_t c = 1; c < vocab_size; ++c)
    if (rng.uniform01() < 0.4) set.push_back(c);
  if (set.empty()) set.push_back(vocab_size - 1);
  return set;
}

GradCheckResult check_ctc(std::size_t trials, Rng& rng) {
  GradCheckResult r{"ctc_loss", trials, 0.0, kOpTol, false};
  for (std::size_t n = 0; n < trials; ++n) {
    const std::size_t T = 2 + rng.uniform_below(5);
    const std::size_t V = 3 + rng.uniform_below(4);
    const std::int32_t blank = 0;
    Transcript labels;
    for (;;) {
      labels = random_labels(rng, rng.uniform_below(4), static_cast<std::int32_t>(V), blank);
      std::size_t repeats = 0;
      for (std::size_t i = 0; i + 1 < labels.size(); ++i)
        if (labels.chars[i] == labels.chars[i + 1]) ++repeats;
      if (labels.size() + repeats <= T) break;
    }
    Mat logits = random_logits(rng, T, V);
    auto [loss, grad] = ctc_loss(PosteriorSequence::from_logits(logits), labels, blank);
    (void)loss;
    const double err = check_grad(logits.v, grad.v, [&] {
      return ctc_loss(PosteriorSequence::from_logits(logits), labels, blank).first;
    });
    r.max_rel_err = std::max(r.max_rel_err, err);
  }
  r.pass = r.max_rel_err <= r.tol;
  return r;
}

GradCheckResult check_attention(std::size_t trials, Rng& rng) {
  GradCheckResult r{"attention_ce_loss", trials, 0.0, kOpTol, false};
  for (std::size_t n = 0; n < trials; ++n) {
    const std::size_t V = 4 + rng.uniform_below(4);
    const std::int32_t eos = 1;
    Transcript labels = random_labels(rng, rng.uniform_below(4), static_cast<std::int32_t>(V), 0);
    Mat logits = random_logits(rng, labels.size() + 1, V);
    auto [loss, grad] =
        attention_ce_loss(PosteriorSequence::from_logits(logits), labels, eos);
    (void)loss;
    const double err = check_grad(logits.v, grad.v, [&] {
      return attention_ce_loss(PosteriorSequence::from_logits(logits), labels, eos).first;
    });
    r.max_rel_err = std::max(r.max_rel_err, err);
  }
  r.pass = r.max_rel_err <= r.tol;
  return r;
}

GradCheckResult check_reward(std::size_t trials, Rng& rng) {
  GradCheckResult r{"cs_reward", trials, 0.0, kOpTol, false};
  for (std::size_t n = 0; n < trials; ++n) {
    const std::size_t T = 1 + rng.uniform_below(5);
    const std::size_t V = 3 + rng.uniform_below(5);
    const std::vector<std::int32_t> english = random_english_set(rng, static_cast<std::int32_t>(V));
    Mat logits = random_logits(rng, T, V);
    auto [reward, grad] = cs_reward(PosteriorSequence::from_logits(logits), english);
    (void)reward;
    const double err = check_grad(logits.v, grad.v, [&] {
      return cs_reward(PosteriorSequence::from_logits(logits), english).first;
    });
    r.max_rel_err = std::max(r.max_rel_err, err);
  }
  r.pass = r.max_rel_err <= r.tol;
  return r;
}

GradCheckResult check_cs_bias(std::size_t trials, Rng& rng) {
  GradCheckResult r{"cs_bias_loss", trials, 0.0, kOpTol, false};
  for (std::size_t n = 0; n < trials; ++n) {
    const std::size_t V = 4 + rng.uniform_below(3);
    LossConfig cfg;
    cfg.blank_index = 0;
    cfg.eos_index = 1;
    cfg.lambda_mtl = rng.uniform01();
    cfg.lambda_prime = 0.5 * rng.uniform01();
    cfg.reward_enabled = true;
    cfg.english_set = random_english_set(rng, static_cast<std::int32_t>(V));

    Transcript labels;
    std::size_t T;
    for (;;) {
      labels = random_labels(rng, 1 + rng.uniform_below(3), static_cast<std::int32_t>(V), 0);
      // eos never appears inside labels
      bool has_eos = false;
      for (std::int32_t c : labels.chars) has_eos |= (c == cfg.eos_index);
      std::size_t repeats = 0;
      for (std::size_t i = 0; i + 1 < labels.size(); ++i)
        if (labels.chars[i] == labels.chars[i + 1]) ++repeats;
      T = 3 + rng.uniform_below(4);
      if (!has_eos && labels.size() + repeats <= T) break;
    }
    Mat ctc_logits = random_logits(rng, T, V);
    Mat att_logits = random_logits(rng, labels.size() + 1, V);

    auto eval = [&] {
      return cs_bias_loss(PosteriorSequence::from_logits(ctc_logits),
                          PosteriorSequence::from_logits(att_logits), labels, cfg);
    };
    const LossOutput out = eval();
    const double err_ctc = check_grad(ctc_logits.v, out.grad_ctc_logits.v,
                                      [&] { return eval().total; });
    const double err_att = check_grad(att_logits.v, out.grad_att_logits.v,
                                      [&] { return eval().total; });
    r.max_rel_err = std::max({r.max_rel_err, err_ctc, err_att});
  }
  r.pass = r.max_rel_err <= r.tol;
  return r;
}

GradCheckResult check_model(std::size_t trials, Rng& rng) {
  GradCheckResult r{"toy_model_end_to_end", trials, 0.0, kModelTol, false};
  const Vocabulary vocab = build_vocabulary({"ab कग"});
  LossConfig cfg = LossConfig::from_vocabulary(vocab);
  cfg.reward_enabled = true;

  for (std::size_t n = 0; n < trials; ++n) {
    Rng init = rng.substream("model-init", n + 1);
    ToyModel model(vocab, 3, 4, init);

    FeatureMatrix feats(3, 3);
    for (float& x : feats.data) x = static_cast<float>(rng.normal());
    Transcript labels =
        random_labels(rng, 2, vocab.size(), Vocabulary::kBlank);
    // keep reserved markers out of the labels
    for (std::int32_t& c : labels.chars)
      if (c < Vocabulary::kNumReserved) c = Vocabulary::kNumReserved;

    auto total = [&] {
      ToyModel::Forward f = model.forward(feats, &labels);
      return cs_bias_loss(f.ctc, f.att, labels, cfg).total;
    };

    ToyModel::Forward fwd = model.forward(feats, &labels);
    LossOutput out = cs_bias_loss(fwd.ctc, fwd.att, labels, cfg);
    Gradients grads = model.zero_gradients();
    model.backward(feats, fwd, out.grad_ctc_logits, &out.grad_att_logits, grads);

    for (std::size_t ti = 0; ti < model.tensors().size(); ++ti) {
      const double err = check_grad(model.tensors()[ti].data, grads[ti], total);
      r.max_rel_err = std::max(r.max_rel_err, err);
    }
  }
  r.pass = r.max_rel_err <= r.tol;
  return r;
}

}  // namespace

GradCheckReport run_gradcheck(std::size_t trials, std::uint64_t seed) {
  GradCheckReport report;
  report.seed = seed;
  report.trials = trials;
  Rng root(seed);

  Rng r1 = root.substream("ctc");
  report.checks.push_back(check_ctc(trials, r1));
  Rng r2 = root.substream("attention");
  report.checks.push_back(check_attention(trials, r2));
  Rng r3 = root.substream("reward");
  report.checks.push_back(check_reward(trials, r3));
  Rng r4 = root.substream("cs-bias");
  report.checks.push_back(check_cs_bias(trials, r4));
  Rng r5 = root.substream("model");
  report.checks.push_back(check_model(trials, r5));

  report.pass = true;
  for (const GradCheckResult& c : report.checks) report.pass = report.pass && c.pass;
  return report;
}

}  // namespace csasr
