// csasr/model.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_MODEL_HPP
#define CSASR_MODEL_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "csasr/features.hpp"
#include "csasr/loss.hpp"
#include "csasr/numeric.hpp"
#include "csasr/rng.hpp"

namespace csasr {

/// Named parameter tensor (rank 1 or 2, row-major doubles).
struct Tensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> data;
  bool trainable = true;

  std::size_t size() const { return data.size(); }
};

/// Gradients parallel to ToyModel::tensors(), same order and shapes.
using Gradients = std::vector<std::vector<double>>;

/// Desk-scale encoder-decoder with the same loss interface as the full-size
/// hybrid CTC/attention architecture.
///
/// Encoder: one tanh recurrent layer over frames plus an affine projection to
/// per-frame vocabulary logits (the CTC branch). Decoder: previous-symbol
/// embedding, dot-product attention over encoder states, affine projection to
/// per-step logits (the attention branch, teacher-forced).
class ToyModel {
 public:
  ToyModel() = default;
  ToyModel(Vocabulary vocab, std::size_t feat_dims, std::size_t hidden, Rng& init_rng);

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t feat_dims() const { return feat_dims_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t vocab_dim() const { return static_cast<std::size_t>(vocab_.size()); }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  Tensor& tensor(std::string_view name);
  const Tensor& tensor(std::string_view name) const;

  static bool is_encoder_tensor(std::string_view name) { return name.starts_with("enc."); }
  void set_encoder_trainable(bool trainable);

  /// Everything the backward pass needs from a forward pass.
  struct Forward {
    Mat enc_h;               // [T x H] recurrent states
    PosteriorSequence ctc;   // [T x V]
    // Attention branch; rows exist only when labels were supplied.
    std::vector<std::int32_t> prev;  // decoder inputs: eos, l1, ..., lL
    Mat embed;               // [L+1 x H]
    Mat att_w;               // [L+1 x T] attention weights
    Mat ctx;                 // [L+1 x H] context vectors
    PosteriorSequence att;   // [L+1 x V]
  };

  /// Runs the encoder, and the teacher-forced decoder when labels != nullptr.
  Forward forward(const FeatureMatrix& features, const Transcript* labels) const;

  Gradients zero_gradients() const;

  /// Accumulates parameter gradients for one utterance given the loss
  /// gradients w.r.t. both logit matrices. grad_att may be null when the
  /// forward pass had no attention branch.
  void backward(const FeatureMatrix& features, const Forward& fwd, const Mat& grad_ctc,
                const Mat* grad_att, Gradients& grads) const;

  /// CTC decoding over encoder logits. beam_width == 1 is greedy (argmax,
  /// collapse repeats, drop blanks); wider runs prefix beam search. Ties are
  /// broken toward the lexicographically smaller symbol sequence.
  Transcript decode(const FeatureMatrix& features, std::size_t beam_width) const;

 private:
  Vocabulary vocab_;
  std::size_t feat_dims_ = 0;
  std::size_t hidden_ = 0;
  std::vector<Tensor> tensors_;

  void build_tensors();
};

/// Greedy CTC decoding over per-frame scores: argmax per frame (lowest index
/// wins ties), collapse repeats, drop blanks.
std::vector<std::int32_t> ctc_greedy_decode(const Mat& log_probs, std::int32_t blank);

/// CTC prefix beam search; exact when beam_width covers every reachable
/// prefix. Ties break toward the lexicographically smaller symbol sequence.
std::vector<std::int32_t> ctc_prefix_beam_decode(const Mat& log_probs, std::int32_t blank,
                                                 std::size_t beam_width);

// Checkpoints: little-endian binary, magic "CSCK", u32 version=1, vocabulary
// snapshot, then named float64 tensors. Written atomically (temp + rename).
void save_checkpoint(const std::filesystem::path& path, const ToyModel& model);
ToyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace csasr

#endif  // CSASR_MODEL_HPP
