// csasr/mixup.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_MIXUP_HPP
#define CSASR_MIXUP_HPP

#include <cstdint>
#include <vector>

#include "csasr/features.hpp"
#include "csasr/rng.hpp"

namespace csasr {

/// Beta shape parameters for the mixing coefficient. alpha = beta = 0.4
/// makes the distribution U-shaped, so draws land near 0 or 1 and the folded
/// coefficient stays close to 1 (the mix is dominated by the TTS member).
struct MixupParams {
  double alpha = 0.4;
  double beta = 0.4;
  std::uint64_t seed = 0;
};

/// A TTS sample nudged toward real speech. Keeps the TTS transcript and the
/// TTS time axis.
struct MixedUtterance {
  FeatureMatrix features;
  Transcript transcript;
  double lambda_mix = 1.0;  // in [0.5, 1]
  std::string source_tts_id;
  std::string source_real_id;
};

/// Raw Beta(alpha, beta) draw (the "underlying lambda").
double sample_beta(const MixupParams& params, Rng& rng);

/// max(lambda, 1 - lambda) for lambda ~ Beta(alpha, beta); always in [0.5, 1].
double sample_lambda_mix(const MixupParams& params, Rng& rng);

/// Element-wise convex combination lambda*tts + (1-lambda)*real over the TTS
/// frame range. The real sample is truncated to the TTS frame count, or
/// zero-padded when shorter.
MixedUtterance mix_pair(const Utterance& tts, const Utterance& real, double lambda_mix);

/// Mixes one batch of TTS utterances against partners drawn from the real
/// pool: a single lambda_mix for the whole batch, partners uniform without
/// replacement (with replacement only when the pool is smaller than the
/// batch). Deterministic given the rng state.
std::vector<MixedUtterance> mix_batches(const std::vector<Utterance>& tts_batch,
                                        const std::vector<Utterance>& real_pool,
                                        const MixupParams& params, Rng& rng);

}  // namespace csasr

#endif  // CSASR_MIXUP_HPP
