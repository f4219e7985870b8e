// csasr/model.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#include "csasr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace csasr {

namespace {

constexpr char kCkptMagic[4] = {'C', 'S', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

// Tensor names; everything prefixed "enc." freezes together.
constexpr const char* kEncWx = "enc.w_x";      // [H x D]
constexpr const char* kEncWh = "enc.w_h";      // [H x H]
constexpr const char* kEncBh = "enc.b_h";      // [H]
constexpr const char* kEncWp = "enc.w_proj";   // [V x H]
constexpr const char* kEncBp = "enc.b_proj";   // [V]
constexpr const char* kDecEm = "dec.embed";    // [V x H]
constexpr const char* kDecWo = "dec.w_out";    // [V x 2H]
constexpr const char* kDecBo = "dec.b_out";    // [V]

}  // namespace

ToyModel::ToyModel(Vocabulary vocab, std::size_t feat_dims, std::size_t hidden, Rng& init_rng)
    : vocab_(std::move(vocab)), feat_dims_(feat_dims), hidden_(hidden) {
  build_tensors();
  const double scale = 0.1;
  for (Tensor& t : tensors_)
    for (double& x : t.data) x = scale * init_rng.normal();
}

void ToyModel::build_tensors() {
  const std::size_t D = feat_dims_, H = hidden_;
  const std::size_t V = static_cast<std::size_t>(vocab_.size());
  tensors_.clear();
  tensors_.push_back({kEncWx, {H, D}, std::vector<double>(H * D, 0.0), true});
  tensors_.push_back({kEncWh, {H, H}, std::vector<double>(H * H, 0.0), true});
  tensors_.push_back({kEncBh, {H}, std::vector<double>(H, 0.0), true});
  tensors_.push_back({kEncWp, {V, H}, std::vector<double>(V * H, 0.0), true});
  tensors_.push_back({kEncBp, {V}, std::vector<double>(V, 0.0), true});
  tensors_.push_back({kDecEm, {V, H}, std::vector<double>(V * H, 0.0), true});
  tensors_.push_back({kDecWo, {V, 2 * H}, std::vector<double>(V * 2 * H, 0.0), true});
  tensors_.push_back({kDecBo, {V}, std::vector<double>(V, 0.0), true});
}

Tensor& ToyModel::tensor(std::string_view name) {
  for (Tensor& t : tensors_)
    if (t.name == name) return t;
  throw Error("no such tensor: " + std::string(name));
}

const Tensor& ToyModel::tensor(std::string_view name) const {
  for (const Tensor& t : tensors_)
    if (t.name == name) return t;
  throw Error("no such tensor: " + std::string(name));
}

void ToyModel::set_encoder_trainable(bool trainable) {
  for (Tensor& t : tensors_)
    if (is_encoder_tensor(t.name)) t.trainable = trainable;
}

Gradients ToyModel::zero_gradients() const {
  Gradients g;
  g.reserve(tensors_.size());
  for (const Tensor& t : tensors_) g.emplace_back(t.size(), 0.0);
  return g;
}

ToyModel::Forward ToyModel::forward(const FeatureMatrix& features, const Transcript* labels) const {
  if (features.dims != feat_dims_)
    throw DimMismatch(feat_dims_, features.dims, "forward input");
  const std::size_t T = features.frames;
  const std::size_t D = feat_dims_, H = hidden_;
  const std::size_t V = static_cast<std::size_t>(vocab_.size());

  const Tensor& wx = tensor(kEncWx);
  const Tensor& wh = tensor(kEncWh);
  const Tensor& bh = tensor(kEncBh);
  const Tensor& wp = tensor(kEncWp);
  const Tensor& bp = tensor(kEncBp);

  Forward f;
  f.enc_h = Mat(T, H);
  Mat ctc_logits(T, V);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < H; ++i) {
      double u = bh.data[i];
      for (std::size_t d = 0; d < D; ++d)
        u += wx.data[i * D + d] * static_cast<double>(features.at(t, d));
      if (t > 0)
        for (std::size_t k = 0; k < H; ++k) u += wh.data[i * H + k] * f.enc_h(t - 1, k);
      f.enc_h(t, i) = std::tanh(u);
    }
    for (std::size_t j = 0; j < V; ++j) {
      double z = bp.data[j];
      for (std::size_t k = 0; k < H; ++k) z += wp.data[j * H + k] * f.enc_h(t, k);
      ctc_logits(t, j) = z;
    }
  }
  if (!ctc_logits.all_finite()) throw Error("non-finite encoder logits");
  f.ctc = PosteriorSequence::from_logits(std::move(ctc_logits));

  if (labels == nullptr) return f;

  const Tensor& em = tensor(kDecEm);
  const Tensor& wo = tensor(kDecWo);
  const Tensor& bo = tensor(kDecBo);

  const std::size_t S = labels->size() + 1;
  f.prev.resize(S);
  f.prev[0] = Vocabulary::kEos;  // eos doubles as the start symbol
  for (std::size_t s = 1; s < S; ++s) f.prev[s] = labels->chars[s - 1];

  f.embed = Mat(S, H);
  f.att_w = Mat(S, T);
  f.ctx = Mat(S, H);
  Mat att_logits(S, V);
  for (std::size_t s = 0; s < S; ++s) {
    const double* e = em.data.data() + static_cast<std::size_t>(f.prev[s]) * H;
    for (std::size_t k = 0; k < H; ++k) f.embed(s, k) = e[k];
    // Dot-product attention of the embedding against encoder states.
    std::vector<double> scores(T);
    for (std::size_t t = 0; t < T; ++t) {
      double sc = 0.0;
      for (std::size_t k = 0; k < H; ++k) sc += f.embed(s, k) * f.enc_h(t, k);
      scores[t] = sc;
    }
    softmax_row(scores, f.att_w.row(s));
    for (std::size_t k = 0; k < H; ++k) {
      double c = 0.0;
      for (std::size_t t = 0; t < T; ++t) c += f.att_w(s, t) * f.enc_h(t, k);
      f.ctx(s, k) = c;
    }
    for (std::size_t j = 0; j < V; ++j) {
      double z = bo.data[j];
      for (std::size_t k = 0; k < H; ++k) z += wo.data[j * 2 * H + k] * f.embed(s, k);
      for (std::size_t k = 0; k < H; ++k) z += wo.data[j * 2 * H + H + k] * f.ctx(s, k);
      att_logits(s, j) = z;
    }
  }
  if (!att_logits.all_finite()) throw Error("non-finite decoder logits");
  f.att = PosteriorSequence::from_logits(std::move(att_logits));
  return f;
}

void ToyModel::backward(const FeatureMatrix& features, const Forward& fwd, const Mat& grad_ctc,
                        const Mat* grad_att, Gradients& grads) const {
  const std::size_t T = features.frames;
  const std::size_t D = feat_dims_, H = hidden_;
  const std::size_t V = static_cast<std::size_t>(vocab_.size());

  // Tensor order matches build_tensors().
  enum { iWx, iWh, iBh, iWp, iBp, iEm, iWo, iBo };
  const Tensor& wh = tensor(kEncWh);
  const Tensor& wp = tensor(kEncWp);
  const Tensor& wo = tensor(kDecWo);

  Mat dh(T, H);  // accumulated dL/d enc_h

  // CTC head.
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < V; ++j) {
      const double g = grad_ctc(t, j);
      if (g == 0.0) continue;
      grads[iBp][j] += g;
      for (std::size_t k = 0; k < H; ++k) {
        grads[iWp][j * H + k] += g * fwd.enc_h(t, k);
        dh(t, k) += wp.data[j * H + k] * g;
      }
    }
  }

  // Attention branch.
  if (grad_att != nullptr && fwd.prev.size() > 0) {
    const std::size_t S = fwd.prev.size();
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<double> de(H, 0.0), dctx(H, 0.0);
      for (std::size_t j = 0; j < V; ++j) {
        const double g = (*grad_att)(s, j);
        if (g == 0.0) continue;
        grads[iBo][j] += g;
        for (std::size_t k = 0; k < H; ++k) {
          grads[iWo][j * 2 * H + k] += g * fwd.embed(s, k);
          grads[iWo][j * 2 * H + H + k] += g * fwd.ctx(s, k);
          de[k] += wo.data[j * 2 * H + k] * g;
          dctx[k] += wo.data[j * 2 * H + H + k] * g;
        }
      }
      // ctx = sum_t a_t h_t
      std::vector<double> da(T, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < H; ++k) {
          acc += fwd.enc_h(t, k) * dctx[k];
          dh(t, k) += fwd.att_w(s, t) * dctx[k];
        }
        da[t] = acc;
      }
      // Softmax backward over attention scores.
      double dot = 0.0;
      for (std::size_t t = 0; t < T; ++t) dot += fwd.att_w(s, t) * da[t];
      for (std::size_t t = 0; t < T; ++t) {
        const double ds = fwd.att_w(s, t) * (da[t] - dot);
        if (ds == 0.0) continue;
        for (std::size_t k = 0; k < H; ++k) {
          de[k] += ds * fwd.enc_h(t, k);
          dh(t, k) += ds * fwd.embed(s, k);
        }
      }
      double* gem = grads[iEm].data() + static_cast<std::size_t>(fwd.prev[s]) * H;
      for (std::size_t k = 0; k < H; ++k) gem[k] += de[k];
    }
  }

  // BPTT through the recurrent layer.
  for (std::size_t t = T; t-- > 0;) {
    std::vector<double> du(H);
    for (std::size_t i = 0; i < H; ++i) {
      const double h = fwd.enc_h(t, i);
      du[i] = dh(t, i) * (1.0 - h * h);
    }
    for (std::size_t i = 0; i < H; ++i) {
      const double g = du[i];
      if (g == 0.0) continue;
      grads[iBh][i] += g;
      for (std::size_t d = 0; d < D; ++d)
        grads[iWx][i * D + d] += g * static_cast<double>(features.at(t, d));
      if (t > 0) {
        for (std::size_t k = 0; k < H; ++k) {
          grads[iWh][i * H + k] += g * fwd.enc_h(t - 1, k);
          dh(t - 1, k) += wh.data[i * H + k] * g;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

namespace {

Transcript transcript_from_ids(const Vocabulary& vocab, const std::vector<std::int32_t>& ids) {
  Transcript t;
  t.chars = ids;
  t.scripts.reserve(ids.size());
  for (std::int32_t id : ids) t.scripts.push_back(vocab.script_at(id));
  return t;
}

}  // namespace

std::vector<std::int32_t> ctc_greedy_decode(const Mat& log_probs, std::int32_t blank) {
  std::vector<std::int32_t> ids;
  std::int32_t prev = blank;
  for (std::size_t t = 0; t < log_probs.rows; ++t) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < log_probs.cols; ++j)
      if (log_probs(t, j) > log_probs(t, best)) best = j;
    const std::int32_t sym = static_cast<std::int32_t>(best);
    if (sym != blank && sym != prev) ids.push_back(sym);
    prev = sym;
  }
  return ids;
}

std::vector<std::int32_t> ctc_prefix_beam_decode(const Mat& lp, std::int32_t blank,
                                                 std::size_t beam_width) {
  // Each prefix carries separate log probabilities for alignments ending in
  // blank (pb) and in its final symbol (pnb).
  struct Score {
    double pb = kLogZero;
    double pnb = kLogZero;
    double total() const { return log_add(pb, pnb); }
  };
  using Prefix = std::vector<std::int32_t>;
  std::map<Prefix, Score> beams;
  beams[{}] = {0.0, kLogZero};

  for (std::size_t t = 0; t < lp.rows; ++t) {
    std::map<Prefix, Score> next;
    for (const auto& [prefix, sc] : beams) {
      const double ptot = sc.total();
      {
        Score& ns = next[prefix];
        ns.pb = log_add(ns.pb, ptot + lp(t, blank));
        if (!prefix.empty()) ns.pnb = log_add(ns.pnb, sc.pnb + lp(t, prefix.back()));
      }
      for (std::size_t j = 0; j < lp.cols; ++j) {
        if (static_cast<std::int32_t>(j) == blank) continue;
        Prefix ext = prefix;
        ext.push_back(static_cast<std::int32_t>(j));
        // Extending with a repeat of the last symbol requires the previous
        // alignment to end in blank.
        const double add = (!prefix.empty() && prefix.back() == static_cast<std::int32_t>(j))
                               ? sc.pb + lp(t, j)
                               : ptot + lp(t, j);
        Score& ns = next[std::move(ext)];
        ns.pnb = log_add(ns.pnb, add);
      }
    }
    if (next.size() > beam_width) {
      std::vector<std::pair<const Prefix*, double>> order;
      order.reserve(next.size());
      for (const auto& [prefix, sc] : next) order.emplace_back(&prefix, sc.total());
      // Ties favour the lexicographically smaller prefix (map order).
      std::stable_sort(order.begin(), order.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      std::map<Prefix, Score> pruned;
      for (std::size_t i = 0; i < beam_width; ++i) pruned[*order[i].first] = next[*order[i].first];
      next = std::move(pruned);
    }
    beams = std::move(next);
  }

  const Prefix* best = nullptr;
  double best_score = kLogZero;
  for (const auto& [prefix, sc] : beams) {
    const double s = sc.total();
    if (best == nullptr || s > best_score) {  // strict: map order breaks ties
      best = &prefix;
      best_score = s;
    }
  }
  return best ? *best : Prefix{};
}

Transcript ToyModel::decode(const FeatureMatrix& features, std::size_t beam_width) const {
  if (beam_width < 1) throw Error("beam_width must be >= 1");
  const Forward f = forward(features, nullptr);

  Mat lp = f.ctc.logits;
  for (std::size_t t = 0; t < lp.rows; ++t) {
    const double lse = log_sum_exp(lp.row(t));
    for (double& x : lp.row(t)) x -= lse;
  }

  const std::vector<std::int32_t> ids =
      beam_width == 1 ? ctc_greedy_decode(lp, Vocabulary::kBlank)
                      : ctc_prefix_beam_decode(lp, Vocabulary::kBlank, beam_width);
  return transcript_from_ids(vocab_, ids);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t x) {
  char buf[4];
  std::memcpy(buf, &x, 4);
  out.append(buf, 4);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

std::uint32_t take_u32(const std::string& buf, std::size_t& off) {
  if (off + 4 > buf.size()) throw MalformedRecord("truncated checkpoint");
  std::uint32_t x;
  std::memcpy(&x, buf.data() + off, 4);
  off += 4;
  return x;
}

std::string take_str(const std::string& buf, std::size_t& off) {
  const std::uint32_t n = take_u32(buf, off);
  if (off + n > buf.size()) throw MalformedRecord("truncated checkpoint");
  std::string s = buf.substr(off, n);
  off += n;
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ToyModel& model) {
  std::string buf;
  buf.append(kCkptMagic, 4);
  put_u32(buf, kCkptVersion);

  const Vocabulary& vocab = model.vocab();
  put_u32(buf, static_cast<std::uint32_t>(vocab.size()));
  for (std::int32_t i = 0; i < vocab.size(); ++i) put_str(buf, vocab.symbol_text(i));

  put_u32(buf, static_cast<std::uint32_t>(model.tensors().size()));
  for (const Tensor& t : model.tensors()) {
    put_str(buf, t.name);
    put_u32(buf, static_cast<std::uint32_t>(t.dims.size()));
    for (std::size_t d : t.dims) put_u32(buf, static_cast<std::uint32_t>(d));
    buf.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
  }

  // Atomic: write a sibling temp file, then rename over the target.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingCheckpoint(path.string());
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = std::move(ss).str();

  if (buf.size() < 8 || std::memcmp(buf.data(), kCkptMagic, 4) != 0)
    throw MalformedRecord("bad checkpoint magic in " + path.string());
  std::size_t off = 4;
  const std::uint32_t version = take_u32(buf, off);
  if (version != kCkptVersion)
    throw MalformedRecord("unsupported checkpoint version " + std::to_string(version));

  const std::uint32_t n_symbols = take_u32(buf, off);
  std::vector<std::string> symbols;
  symbols.reserve(n_symbols);
  for (std::uint32_t i = 0; i < n_symbols; ++i) symbols.push_back(take_str(buf, off));
  Vocabulary vocab = Vocabulary::from_symbols(symbols);

  const std::uint32_t n_tensors = take_u32(buf, off);
  std::vector<Tensor> tensors;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t;
    t.name = take_str(buf, off);
    const std::uint32_t rank = take_u32(buf, off);
    std::size_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = take_u32(buf, off);
      t.dims.push_back(d);
      count *= d;
    }
    if (off + count * sizeof(double) > buf.size()) throw MalformedRecord("truncated checkpoint");
    t.data.resize(count);
    std::memcpy(t.data.data(), buf.data() + off, count * sizeof(double));
    off += count * sizeof(double);
    tensors.push_back(std::move(t));
  }

  // Rebuild the model around the stored shapes.
  auto find = [&](const char* name) -> Tensor& {
    for (Tensor& t : tensors)
      if (t.name == name) return t;
    throw MalformedRecord(std::string("checkpoint is missing tensor ") + name);
  };
  Tensor& wx = find(kEncWx);
  if (wx.dims.size() != 2) throw MalformedRecord("enc.w_x must have rank 2");
  const std::size_t hidden = wx.dims[0];
  const std::size_t feat_dims = wx.dims[1];

  Rng dummy(0);
  ToyModel model(vocab, feat_dims, hidden, dummy);
  for (Tensor& dst : model.tensors()) {
    Tensor& src = find(dst.name.c_str());
    if (src.dims != dst.dims)
      throw MalformedRecord("checkpoint tensor " + dst.name + " has unexpected shape");
    dst.data = std::move(src.data);
  }
  return model;
}

}  // namespace csasr
