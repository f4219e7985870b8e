// csasr/loss.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_LOSS_HPP
#define CSASR_LOSS_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "csasr/features.hpp"
#include "csasr/numeric.hpp"

namespace csasr {

/// Which branch the multitask coefficient scales. The weight multiplies the
/// CTC term (so 0.7 CTC / 0.3 attention); flip this single constant for the
/// opposite assignment.
inline constexpr bool kMtlWeightOnCtc = true;

/// Per-timestep output distributions, kept in both prob and logit form.
/// probs is always the row softmax of logits.
struct PosteriorSequence {
  Mat logits;  // [T x V]
  Mat probs;   // [T x V]

  std::size_t steps() const { return logits.rows; }
  std::size_t vocab_size() const { return logits.cols; }

  static PosteriorSequence from_logits(Mat logits);
  /// For tests and oracles: logits = log(p), so softmax(logits) == p.
  static PosteriorSequence from_probs(Mat probs);
};

/// All loss coefficients in one place.
struct LossConfig {
  double lambda_mtl = 0.7;    // weight of the CTC term in L_MTL
  double lambda_prime = 0.25; // scale of the CS reward when enabled
  std::vector<std::int32_t> english_set;
  std::int32_t blank_index = Vocabulary::kBlank;
  std::int32_t eos_index = Vocabulary::kEos;
  bool reward_enabled = false;

  static LossConfig from_vocabulary(const Vocabulary& vocab);
};

struct LossOutput {
  double total = 0.0;
  double l_ctc = 0.0;
  double l_att = 0.0;
  double l_mtl = 0.0;
  double r_ctc = 0.0;  // reward values are always reported;
  double r_att = 0.0;  // they enter total (and gradients) only when enabled
  Mat grad_ctc_logits;
  Mat grad_att_logits;
};

/// Log-space CTC forward-backward. Returns -log P(labels | post) summed over
/// all valid alignments and the exact gradient w.r.t. logits.
std::pair<double, Mat> ctc_loss(const PosteriorSequence& post, const Transcript& labels,
                                std::int32_t blank_index);

/// Per-step cross entropy under teacher forcing; targets are the labels with
/// eos appended, so post must have |labels|+1 rows.
std::pair<double, Mat> attention_ce_loss(const PosteriorSequence& post, const Transcript& labels,
                                         std::int32_t eos_index);

/// R = sum_t sum_{c in S_e} P_t(c), with gradient through the softmax:
/// dR/dz_{t,j} = P_t(j) * ([j in S_e] - sum_{c in S_e} P_t(c)).
std::pair<double, Mat> cs_reward(const PosteriorSequence& post,
                                 std::span<const std::int32_t> english_set);

/// Combined objective: L_MTL = w*L_CTC + (1-w)*L_ATT, minus
/// lambda' * (R_CTC + R_ATT) when the reward is enabled. Gradients are the
/// matching linear combinations.
LossOutput cs_bias_loss(const PosteriorSequence& ctc_post, const PosteriorSequence& att_post,
                        const Transcript& labels, const LossConfig& cfg);

}  // namespace csasr

#endif  // CSASR_LOSS_HPP
