// csasr/features.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#include "csasr/features.hpp"

#include <algorithm>
#include <set>

namespace csasr {

namespace {

const std::string kBlankText = "<blank>";
const std::string kSpaceText = " ";
const std::string kUnkText = "<unk>";
const std::string kEosText = "<eos>";

char32_t fold_latin(char32_t cp) { return (cp >= U'A' && cp <= U'Z') ? cp + 0x20 : cp; }

bool is_supported(char32_t cp) {
  return cp == U' ' || (cp >= U'0' && cp <= U'9') || (cp >= U'a' && cp <= U'z') ||
         (cp >= 0x0900 && cp <= 0x097F);
}

}  // namespace

// ---------------------------------------------------------------------------
// UTF-8
// ---------------------------------------------------------------------------

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      throw MalformedRecord("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > s.size())
      throw MalformedRecord("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80)
        throw MalformedRecord("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (len > 1 && cp < kMin[len])
      throw MalformedRecord("overlong UTF-8 sequence at offset " + std::to_string(i));
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      throw MalformedRecord("invalid codepoint at offset " + std::to_string(i));
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(const std::u32string& s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

void Vocabulary::finish() {
  const std::int32_t n = size();
  cps_.assign(n, 0);
  scripts_.assign(n, Script::kNeutral);
  index_.clear();
  english_.clear();
  is_english_.assign(n, 0);
  for (std::int32_t i = kNumReserved; i < n; ++i) {
    std::u32string cps = decode_utf8(symbols_[i]);
    if (cps.size() != 1)
      throw MalformedRecord("vocabulary symbol " + std::to_string(i) +
                            " is not a single codepoint");
    cps_[i] = cps[0];
    scripts_[i] = script_of(cps[0]);
    index_[cps[0]] = i;
    if (cps[0] >= U'a' && cps[0] <= U'z') {
      english_.push_back(i);
      is_english_[i] = 1;
    }
  }
  index_[U' '] = kSpace;
}

Vocabulary Vocabulary::from_symbols(const std::vector<std::string>& symbol_texts) {
  if (symbol_texts.size() < kNumReserved || symbol_texts[kBlank] != kBlankText ||
      symbol_texts[kSpace] != kSpaceText || symbol_texts[kUnk] != kUnkText ||
      symbol_texts[kEos] != kEosText)
    throw MalformedRecord("vocabulary snapshot is missing the reserved symbols");
  Vocabulary v;
  v.symbols_ = symbol_texts;
  v.finish();
  return v;
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus) {
  std::set<char32_t> seen;
  for (std::size_t ti = 0; ti < corpus.size(); ++ti) {
    std::u32string cps = decode_utf8(corpus[ti]);
    for (std::size_t pos = 0; pos < cps.size(); ++pos) {
      char32_t cp = fold_latin(cps[pos]);
      if (!is_supported(cp))
        throw UnsupportedCodepoint(cp, pos, "transcript " + std::to_string(ti));
      if (cp != U' ') seen.insert(cp);
    }
  }
  Vocabulary v;
  v.symbols_ = {kBlankText, kSpaceText, kUnkText, kEosText};
  for (char32_t cp : seen) {  // std::set iterates in sorted order
    std::string text;
    append_utf8(text, cp);
    v.symbols_.push_back(std::move(text));
  }
  v.finish();
  return v;
}

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

Transcript encode_transcript(const Vocabulary& vocab, std::string_view text) {
  Transcript t;
  std::u32string cps = decode_utf8(text);
  t.chars.reserve(cps.size());
  t.scripts.reserve(cps.size());
  for (std::size_t pos = 0; pos < cps.size(); ++pos) {
    char32_t cp = fold_latin(cps[pos]);
    if (!is_supported(cp)) throw UnsupportedCodepoint(cp, pos);
    std::int32_t idx = vocab.index_of(cp);
    if (idx < 0) idx = Vocabulary::kUnk;
    t.chars.push_back(idx);
    t.scripts.push_back(vocab.script_at(idx));
  }
  return t;
}

std::string transcript_to_text(const Vocabulary& vocab, const Transcript& t) {
  std::string out;
  for (std::int32_t idx : t.chars) out += vocab.symbol_text(idx);
  return out;
}

}  // namespace csasr
