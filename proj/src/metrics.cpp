// csasr/metrics.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#include "csasr/metrics.hpp"

#include <algorithm>

namespace csasr {

namespace {

/// Levenshtein DP (unit costs) with canonical traceback: on ties the op
/// preference is DEL, then INS, then the diagonal.
template <typename Seq>
Alignment align_impl(const Seq& ref, const Seq& hyp) {
  const std::size_t R = ref.size();
  const std::size_t H = hyp.size();
  std::vector<std::vector<unsigned>> d(R + 1, std::vector<unsigned>(H + 1, 0));
  for (std::size_t i = 0; i <= R; ++i) d[i][0] = static_cast<unsigned>(i);
  for (std::size_t j = 0; j <= H; ++j) d[0][j] = static_cast<unsigned>(j);
  for (std::size_t i = 1; i <= R; ++i) {
    for (std::size_t j = 1; j <= H; ++j) {
      const unsigned diag = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0u : 1u);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, diag});
    }
  }

  Alignment a;
  std::size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      a.steps.push_back({EditOp::kDel, static_cast<int>(i - 1), -1});
      ++a.dels;
      --i;
    } else if (j > 0 && d[i][j] == d[i][j - 1] + 1) {
      a.steps.push_back({EditOp::kIns, -1, static_cast<int>(j - 1)});
      ++a.ins;
      --j;
    } else {
      const bool match = ref[i - 1] == hyp[j - 1];
      a.steps.push_back(
          {match ? EditOp::kMatch : EditOp::kSub, static_cast<int>(i - 1),
           static_cast<int>(j - 1)});
      if (match)
        ++a.matches;
      else
        ++a.subs;
      --i;
      --j;
    }
  }
  std::reverse(a.steps.begin(), a.steps.end());
  return a;
}

WerCounts counts_of(const Alignment& a, std::size_t n_ref) {
  WerCounts c;
  c.sub = a.subs;
  c.ins = a.ins;
  c.del = a.dels;
  c.n_ref = n_ref;
  c.empty_reference = n_ref == 0 && (a.ins + a.subs + a.dels) > 0;
  return c;
}

}  // namespace

Alignment align_words(const Words& ref, const Words& hyp) { return align_impl(ref, hyp); }

Alignment align_chars(const std::u32string& ref, const std::u32string& hyp) {
  return align_impl(ref, hyp);
}

WerCounts wer(const Words& ref, const Words& hyp) {
  return counts_of(align_words(ref, hyp), ref.size());
}

WerCounts cer(const std::u32string& ref, const std::u32string& hyp) {
  return counts_of(align_chars(ref, hyp), ref.size());
}

WerCounts cer(const Vocabulary& vocab, const Transcript& ref, const Transcript& hyp) {
  return cer(decode_utf8(transcript_to_text(vocab, ref)),
             decode_utf8(transcript_to_text(vocab, hyp)));
}

Script word_script(std::string_view word_utf8) {
  std::size_t dev = 0, lat = 0;
  for (char32_t cp : decode_utf8(word_utf8)) {
    switch (script_of(cp)) {
      case Script::kDevanagari: ++dev; break;
      case Script::kLatin: ++lat; break;
      case Script::kNeutral: break;
    }
  }
  if (dev > lat) return Script::kDevanagari;
  if (lat > dev) return Script::kLatin;
  return Script::kNeutral;
}

std::vector<Script> word_scripts(const Words& words) {
  std::vector<Script> out;
  out.reserve(words.size());
  for (const std::string& w : words) out.push_back(word_script(w));
  return out;
}

namespace {

/// Adjacent pairs of opposite-script words, looking through neutral words.
std::vector<std::pair<std::size_t, std::size_t>> switch_pairs(const std::vector<Script>& scripts) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t prev = scripts.size();  // index of the last scripted word
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    if (scripts[i] == Script::kNeutral) continue;
    if (prev < scripts.size() && scripts[prev] != scripts[i]) pairs.emplace_back(prev, i);
    prev = i;
  }
  return pairs;
}

}  // namespace

SwitchPointSet find_switch_points(const std::vector<Script>& scripts) {
  SwitchPointSet set;
  for (auto [a, b] : switch_pairs(scripts)) {
    set.positions.insert(a);
    set.positions.insert(b);
  }
  return set;
}

SwitchPointSet find_switch_points(const Words& ref_words) {
  return find_switch_points(word_scripts(ref_words));
}

std::pair<std::size_t, std::size_t> switch_match_counts(const Words& ref, const Words& hyp,
                                                        const CsWerOptions& opts) {
  const Alignment a = align_words(ref, hyp);
  std::vector<char> matched(ref.size(), 0);
  for (const AlignStep& s : a.steps)
    if (s.op == EditOp::kMatch) matched[static_cast<std::size_t>(s.ref_idx)] = 1;

  const std::vector<Script> scripts = word_scripts(ref);
  std::size_t m = 0, n = 0;
  if (opts.count_doubly_adjacent_twice) {
    for (auto [x, y] : switch_pairs(scripts)) {
      m += 2;
      n += matched[x] + matched[y];
    }
  } else {
    for (std::size_t pos : find_switch_points(scripts).positions) {
      ++m;
      n += matched[pos];
    }
  }
  return {m, n};
}

CsWerResult cs_wer(const std::vector<Words>& refs, const std::vector<Words>& hyps,
                   const CsWerOptions& opts) {
  if (refs.size() != hyps.size()) throw Error("cs_wer: refs and hyps must pair up");
  CsWerResult r;
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto [m, n] = switch_match_counts(refs[i], hyps[i], opts);
    r.m += m;
    r.n += n;
    if (m > 0) {
      sum += 1.0 - static_cast<double>(n) / static_cast<double>(m);
      ++scored;
    }
  }
  if (opts.per_utterance_average) {
    if (scored == 0) throw NoSwitchPoints();
    r.value = sum / static_cast<double>(scored);
  } else {
    if (r.m == 0) throw NoSwitchPoints();
    r.value = 1.0 - static_cast<double>(r.n) / static_cast<double>(r.m);
  }
  return r;
}

Words split_words(std::string_view text) {
  Words words;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(' ', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) words.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

EvalReport evaluate_corpus(const std::vector<std::string>& ids,
                           const std::vector<std::string>& refs,
                           const std::vector<std::string>& hyps, const CsWerOptions& opts) {
  if (ids.size() != refs.size() || refs.size() != hyps.size())
    throw Error("evaluate_corpus: ids, refs and hyps must pair up");

  EvalReport report;
  std::size_t word_err = 0, word_n = 0, char_err = 0, char_n = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    UtteranceEval ue;
    ue.id = ids[i];
    const Words rw = split_words(refs[i]);
    const Words hw = split_words(hyps[i]);
    ue.word = wer(rw, hw);
    ue.chars = cer(decode_utf8(refs[i]), decode_utf8(hyps[i]));
    std::tie(ue.m, ue.n) = switch_match_counts(rw, hw, opts);
    word_err += ue.word.sub + ue.word.ins + ue.word.del;
    word_n += ue.word.n_ref;
    char_err += ue.chars.sub + ue.chars.ins + ue.chars.del;
    char_n += ue.chars.n_ref;
    report.m += ue.m;
    report.n += ue.n;
    report.per_utterance.push_back(std::move(ue));
  }
  report.wer = word_n > 0 ? static_cast<double>(word_err) / static_cast<double>(word_n) : 0.0;
  report.cer = char_n > 0 ? static_cast<double>(char_err) / static_cast<double>(char_n) : 0.0;
  if (report.m > 0)
    report.cs_wer = 1.0 - static_cast<double>(report.n) / static_cast<double>(report.m);
  return report;
}

}  // namespace csasr
