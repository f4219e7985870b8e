// csasr/mixup.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#include "csasr/mixup.hpp"

#include <algorithm>

namespace csasr {

double sample_beta(const MixupParams& params, Rng& rng) {
  if (!(params.alpha > 0.0) || !(params.beta > 0.0))
    throw Error("mixup alpha and beta must be positive");
  return rng.beta(params.alpha, params.beta);
}

double sample_lambda_mix(const MixupParams& params, Rng& rng) {
  double lambda = sample_beta(params, rng);
  return std::max(lambda, 1.0 - lambda);
}

MixedUtterance mix_pair(const Utterance& tts, const Utterance& real, double lambda_mix) {
  if (tts.kind != SampleKind::kTts) throw Error("mix_pair: first operand must be a TTS sample");
  if (real.kind != SampleKind::kReal) throw Error("mix_pair: second operand must be real speech");
  if (tts.features.dims != real.features.dims)
    throw DimMismatch(tts.features.dims, real.features.dims, real.id);
  if (!(lambda_mix >= 0.5 && lambda_mix <= 1.0)) throw InvalidLambda(lambda_mix);

  // The transcript is the TTS member's, so the TTS time axis wins: the real
  // partner is truncated to the TTS frame count or zero-padded when shorter.
  MixedUtterance out;
  out.transcript = tts.transcript;
  out.lambda_mix = lambda_mix;
  out.source_tts_id = tts.id;
  out.source_real_id = real.id;
  out.features = FeatureMatrix(tts.features.frames, tts.features.dims);
  const double lam = lambda_mix;
  for (std::size_t t = 0; t < tts.features.frames; ++t) {
    for (std::size_t d = 0; d < tts.features.dims; ++d) {
      const double a = tts.features.at(t, d);
      const double b = t < real.features.frames ? real.features.at(t, d) : 0.0;
      out.features.at(t, d) = static_cast<float>(lam * a + (1.0 - lam) * b);
    }
  }
  return out;
}

std::vector<MixedUtterance> mix_batches(const std::vector<Utterance>& tts_batch,
                                        const std::vector<Utterance>& real_pool,
                                        const MixupParams& params, Rng& rng) {
  if (real_pool.empty()) throw EmptyRealPool();

  const double lambda_mix = sample_lambda_mix(params, rng);  // one draw per batch

  const std::size_t k = tts_batch.size();
  const std::size_t pool = real_pool.size();
  std::vector<std::size_t> partners;
  partners.reserve(k);
  if (pool >= k) {
    // Without replacement, by rejection; draw order fixes the pairing.
    std::vector<char> used(pool, 0);
    while (partners.size() < k) {
      std::size_t j = static_cast<std::size_t>(rng.uniform_below(pool));
      if (used[j]) continue;
      used[j] = 1;
      partners.push_back(j);
    }
  } else {
    for (std::size_t i = 0; i < k; ++i)
      partners.push_back(static_cast<std::size_t>(rng.uniform_below(pool)));
  }

  std::vector<MixedUtterance> mixed;
  mixed.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    mixed.push_back(mix_pair(tts_batch[i], real_pool[partners[i]], lambda_mix));
  return mixed;
}

}  // namespace csasr
