// csasr/loss.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#include "csasr/loss.hpp"

#include <cmath>

namespace csasr {

PosteriorSequence PosteriorSequence::from_logits(Mat logits) {
  PosteriorSequence p;
  p.probs = softmax_rows(logits);
  p.logits = std::move(logits);
  return p;
}

PosteriorSequence PosteriorSequence::from_probs(Mat probs) {
  for (std::size_t t = 0; t < probs.rows; ++t) {
    double sum = 0.0;
    for (double x : probs.row(t)) {
      if (!(x >= 0.0)) throw Error("posterior probabilities must be nonnegative");
      sum += x;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw Error("posterior row " + std::to_string(t) + " does not sum to 1");
  }
  PosteriorSequence p;
  p.logits = Mat(probs.rows, probs.cols);
  for (std::size_t i = 0; i < probs.v.size(); ++i) p.logits.v[i] = std::log(probs.v[i]);
  p.probs = std::move(probs);
  return p;
}

LossConfig LossConfig::from_vocabulary(const Vocabulary& vocab) {
  LossConfig cfg;
  cfg.english_set = vocab.english_set();
  cfg.blank_index = Vocabulary::kBlank;
  cfg.eos_index = Vocabulary::kEos;
  return cfg;
}

namespace {

/// Row-wise log-softmax of the logits; more accurate than log(probs).
Mat log_probs_of(const PosteriorSequence& post) {
  Mat lp = post.logits;
  for (std::size_t t = 0; t < lp.rows; ++t) {
    double lse = log_sum_exp(lp.row(t));
    for (double& x : lp.row(t)) x -= lse;
  }
  return lp;
}

}  // namespace

std::pair<double, Mat> ctc_loss(const PosteriorSequence& post, const Transcript& labels,
                                std::int32_t blank_index) {
  const std::size_t T = post.steps();
  const std::size_t V = post.vocab_size();
  if (T == 0) throw EmptyPosterior();

  const std::size_t L = labels.size();
  std::size_t repeats = 0;
  for (std::size_t i = 0; i + 1 < L; ++i)
    if (labels.chars[i] == labels.chars[i + 1]) ++repeats;
  // Shortest path emitting the labels: every symbol once plus a separating
  // blank between equal neighbours.
  const std::size_t needed = L + repeats;
  if (T < needed) throw LabelTooLong(T, needed);

  const std::size_t S = 2 * L + 1;
  std::vector<std::int32_t> ext(S, blank_index);
  for (std::size_t i = 0; i < L; ++i) {
    const std::int32_t c = labels.chars[i];
    if (c < 0 || static_cast<std::size_t>(c) >= V)
      throw Error("label symbol out of range: " + std::to_string(c));
    if (c == blank_index) throw Error("labels must not contain the blank symbol");
    ext[2 * i + 1] = c;
  }

  const Mat lp = log_probs_of(post);
  auto allows_skip = [&](std::size_t s) {
    return s >= 2 && ext[s] != blank_index && ext[s] != ext[s - 2];
  };

  Mat alpha(T, S, kLogZero);
  alpha(0, 0) = lp(0, ext[0]);
  if (S > 1) alpha(0, 1) = lp(0, ext[1]);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (allows_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kLogZero ? kLogZero : a + lp(t, ext[s]);
    }
  }

  double log_p = alpha(T - 1, S - 1);
  if (S > 1) log_p = log_add(log_p, alpha(T - 1, S - 2));
  if (log_p == kLogZero) throw Error("label sequence has zero probability under the posterior");

  // beta(t, s) excludes the emission at (t, s), so alpha + beta sums to
  // log_p over s at every t.
  Mat beta(T, S, kLogZero);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + lp(t + 1, ext[s]);
      if (s + 1 < S) b = log_add(b, beta(t + 1, s + 1) + lp(t + 1, ext[s + 1]));
      if (s + 2 < S && allows_skip(s + 2))
        b = log_add(b, beta(t + 1, s + 2) + lp(t + 1, ext[s + 2]));
      beta(t, s) = b;
    }
  }

  // gamma_t(k): posterior probability of emitting k at frame t given the
  // labels. dL/dlogit = P_t(k) - gamma_t(k).
  Mat grad = post.probs;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> occ(V, kLogZero);
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = alpha(t, s) + beta(t, s);
      if (ab != kLogZero) occ[ext[s]] = log_add(occ[ext[s]], ab);
    }
    for (std::size_t k = 0; k < V; ++k)
      if (occ[k] != kLogZero) grad(t, k) -= std::exp(occ[k] - log_p);
  }

  return {-log_p, std::move(grad)};
}

std::pair<double, Mat> attention_ce_loss(const PosteriorSequence& post, const Transcript& labels,
                                         std::int32_t eos_index) {
  const std::size_t T = post.steps();
  const std::size_t expected = labels.size() + 1;
  if (T != expected) throw LengthMismatch(T, expected);

  const Mat lp = log_probs_of(post);
  Mat grad = post.probs;
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const std::int32_t target = t < labels.size() ? labels.chars[t] : eos_index;
    loss -= lp(t, target);
    grad(t, target) -= 1.0;
  }
  return {loss, std::move(grad)};
}

std::pair<double, Mat> cs_reward(const PosteriorSequence& post,
                                 std::span<const std::int32_t> english_set) {
  const std::size_t T = post.steps();
  const std::size_t V = post.vocab_size();
  std::vector<char> in_set(V, 0);
  for (std::int32_t c : english_set) in_set.at(static_cast<std::size_t>(c)) = 1;

  double reward = 0.0;
  Mat grad(T, V);
  for (std::size_t t = 0; t < T; ++t) {
    double rt = 0.0;
    for (std::size_t j = 0; j < V; ++j)
      if (in_set[j]) rt += post.probs(t, j);
    reward += rt;
    for (std::size_t j = 0; j < V; ++j)
      grad(t, j) = post.probs(t, j) * ((in_set[j] ? 1.0 : 0.0) - rt);
  }
  return {reward, std::move(grad)};
}

LossOutput cs_bias_loss(const PosteriorSequence& ctc_post, const PosteriorSequence& att_post,
                        const Transcript& labels, const LossConfig& cfg) {
  auto [l_ctc, g_ctc] = ctc_loss(ctc_post, labels, cfg.blank_index);
  auto [l_att, g_att] = attention_ce_loss(att_post, labels, cfg.eos_index);
  auto [r_ctc, gr_ctc] = cs_reward(ctc_post, cfg.english_set);
  auto [r_att, gr_att] = cs_reward(att_post, cfg.english_set);

  const double w_ctc = kMtlWeightOnCtc ? cfg.lambda_mtl : 1.0 - cfg.lambda_mtl;
  const double w_att = 1.0 - w_ctc;

  LossOutput out;
  out.l_ctc = l_ctc;
  out.l_att = l_att;
  out.l_mtl = w_ctc * l_ctc + w_att * l_att;
  out.r_ctc = r_ctc;
  out.r_att = r_att;
  out.total = cfg.reward_enabled ? out.l_mtl - cfg.lambda_prime * (r_ctc + r_att) : out.l_mtl;

  const double lp = cfg.reward_enabled ? cfg.lambda_prime : 0.0;
  out.grad_ctc_logits = Mat(g_ctc.rows, g_ctc.cols);
  for (std::size_t i = 0; i < g_ctc.v.size(); ++i)
    out.grad_ctc_logits.v[i] = w_ctc * g_ctc.v[i] - lp * gr_ctc.v[i];
  out.grad_att_logits = Mat(g_att.rows, g_att.cols);
  for (std::size_t i = 0; i < g_att.v.size(); ++i)
    out.grad_att_logits.v[i] = w_att * g_att.v[i] - lp * gr_att.v[i];

  if (!std::isfinite(out.total)) throw Error("non-finite loss");
  return out;
}

}  // namespace csasr
