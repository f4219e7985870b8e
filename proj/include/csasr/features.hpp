// csasr/features.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_FEATURES_HPP
#define CSASR_FEATURES_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "csasr/errors.hpp"

namespace csasr {

enum class Script { kDevanagari, kLatin, kNeutral };

/// Script class of a single codepoint. Total: everything outside the
/// Devanagari block and a-z (space, digits, markers) is neutral.
inline Script script_of(char32_t cp) {
  if (cp >= 0x0900 && cp <= 0x097F) return Script::kDevanagari;
  if (cp >= U'a' && cp <= U'z') return Script::kLatin;
  return Script::kNeutral;
}

// ---------------------------------------------------------------------------
// UTF-8
// ---------------------------------------------------------------------------

/// Decodes UTF-8; throws MalformedRecord on an invalid byte sequence.
std::u32string decode_utf8(std::string_view s);

void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(const std::u32string& s);

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

/// frames x dims spectral features, row-major float32 (matches the on-disk
/// format bit for bit).
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t frames, std::size_t dims, float fill = 0.0f)
      : frames(frames), dims(dims), data(frames * dims, fill) {}

  float& at(std::size_t t, std::size_t d) { return data[t * dims + d]; }
  float at(std::size_t t, std::size_t d) const { return data[t * dims + d]; }
};

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Grapheme vocabulary with four reserved symbols at fixed indices, then the
/// corpus codepoints in sorted order. The english set is the subset of a-z
/// symbols present (the characters whose posterior mass the CS reward sums).
class Vocabulary {
 public:
  static constexpr std::int32_t kBlank = 0;
  static constexpr std::int32_t kSpace = 1;
  static constexpr std::int32_t kUnk = 2;
  static constexpr std::int32_t kEos = 3;
  static constexpr std::int32_t kNumReserved = 4;

  Vocabulary() = default;

  std::int32_t size() const { return static_cast<std::int32_t>(symbols_.size()); }
  bool empty() const { return symbols_.empty(); }

  /// Display text of a symbol: "<blank>", " ", "<unk>", "<eos>" or the
  /// UTF-8 of a single codepoint.
  const std::string& symbol_text(std::int32_t idx) const { return symbols_.at(idx); }

  Script script_at(std::int32_t idx) const { return scripts_.at(idx); }

  /// Symbol index of a codepoint, or -1 when absent. Space maps to kSpace.
  std::int32_t index_of(char32_t cp) const {
    auto it = index_.find(cp);
    return it == index_.end() ? -1 : it->second;
  }

  const std::vector<std::int32_t>& english_set() const { return english_; }
  bool is_english(std::int32_t idx) const {
    return idx >= 0 && idx < size() && is_english_[idx] != 0;
  }

  bool same_symbols(const Vocabulary& other) const { return symbols_ == other.symbols_; }

  /// Rebuilds a vocabulary from its symbol list (checkpoint restore).
  static Vocabulary from_symbols(const std::vector<std::string>& symbol_texts);

 private:
  friend Vocabulary build_vocabulary(const std::vector<std::string>& corpus);
  void finish();  // derives scripts, english set, codepoint index

  std::vector<std::string> symbols_;
  std::vector<char32_t> cps_;  // 0 for the reserved markers
  std::vector<Script> scripts_;
  std::unordered_map<char32_t, std::int32_t> index_;
  std::vector<std::int32_t> english_;
  std::vector<char> is_english_;
};

/// Builds the grapheme vocabulary for a corpus of raw transcripts.
/// Latin input is case-folded; anything outside Devanagari / a-z / digits /
/// space raises UnsupportedCodepoint. Symbol order is deterministic and
/// independent of corpus order: reserved markers, then sorted codepoints.
Vocabulary build_vocabulary(const std::vector<std::string>& corpus);

// ---------------------------------------------------------------------------
// Transcripts and utterances
// ---------------------------------------------------------------------------

/// A mixed-script character sequence as vocabulary symbol ids with parallel
/// script tags. Never contains blank or eos.
struct Transcript {
  std::vector<std::int32_t> chars;
  std::vector<Script> scripts;

  std::size_t size() const { return chars.size(); }
  bool empty() const { return chars.empty(); }
  bool operator==(const Transcript& o) const { return chars == o.chars; }
};

/// Encodes raw text against a vocabulary. Case-folds, validates codepoint
/// classes (UnsupportedCodepoint otherwise) and maps in-class codepoints
/// missing from the vocabulary to <unk>.
Transcript encode_transcript(const Vocabulary& vocab, std::string_view text);

std::string transcript_to_text(const Vocabulary& vocab, const Transcript& t);

enum class SampleKind { kReal, kTts };

struct Utterance {
  std::string id;
  FeatureMatrix features;
  Transcript transcript;
  SampleKind kind = SampleKind::kReal;
};

}  // namespace csasr

#endif  // CSASR_FEATURES_HPP
