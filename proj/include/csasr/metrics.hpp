// csasr/metrics.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_METRICS_HPP
#define CSASR_METRICS_HPP

#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csasr/features.hpp"

namespace csasr {

enum class EditOp { kMatch, kSub, kIns, kDel };

/// One step of a minimum-edit-distance path. ref_idx / hyp_idx are -1 when
/// the op does not consume that side.
struct AlignStep {
  EditOp op;
  int ref_idx;
  int hyp_idx;
};

struct Alignment {
  std::vector<AlignStep> steps;
  std::size_t matches = 0;
  std::size_t subs = 0;
  std::size_t ins = 0;
  std::size_t dels = 0;

  std::size_t distance() const { return subs + ins + dels; }
};

using Words = std::vector<std::string>;

/// Canonical minimum-edit-distance alignment. Ties during traceback are
/// resolved in the fixed order DEL < INS < SUB/MATCH, so identical inputs
/// always yield the identical path.
Alignment align_words(const Words& ref, const Words& hyp);
Alignment align_chars(const std::u32string& ref, const std::u32string& hyp);

struct WerCounts {
  std::size_t sub = 0;
  std::size_t ins = 0;
  std::size_t del = 0;
  std::size_t n_ref = 0;
  bool empty_reference = false;  // reported, not fatal, for corpus aggregation

  double rate() const {
    if (n_ref == 0)
      return (ins + sub + del) == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    return static_cast<double>(sub + ins + del) / static_cast<double>(n_ref);
  }
};

WerCounts wer(const Words& ref, const Words& hyp);

/// Character-level counterpart of wer, spaces included.
WerCounts cer(const std::u32string& ref, const std::u32string& hyp);
WerCounts cer(const Vocabulary& vocab, const Transcript& ref, const Transcript& hyp);

/// Majority script of a word's characters; ties (including all-neutral) are
/// neutral.
Script word_script(std::string_view word_utf8);
std::vector<Script> word_scripts(const Words& words);

/// Reference word indices adjacent to a script change. Neutral words are
/// transparent: they are skipped when looking for the neighbouring scripted
/// word and never create switch points themselves.
struct SwitchPointSet {
  std::set<std::size_t> positions;
  std::size_t m() const { return positions.size(); }
};

SwitchPointSet find_switch_points(const std::vector<Script>& scripts);
SwitchPointSet find_switch_points(const Words& ref_words);

/// Both readings of the metric definition are available; the defaults are
/// set semantics (a word flanked by two switch points counts once) and
/// corpus-level pooling of N and M.
struct CsWerOptions {
  bool count_doubly_adjacent_twice = false;
  bool per_utterance_average = false;
};

struct CsWerResult {
  double value = 0.0;
  std::size_t m = 0;
  std::size_t n = 0;
};

/// CS-WER = 1 - N/M over paired reference/hypothesis word sequences.
/// Throws NoSwitchPoints when M == 0.
CsWerResult cs_wer(const std::vector<Words>& refs, const std::vector<Words>& hyps,
                   const CsWerOptions& opts = {});

/// Switch stats for one utterance under one alignment: m switch-adjacent
/// reference words, n of them exactly matched.
std::pair<std::size_t, std::size_t> switch_match_counts(const Words& ref, const Words& hyp,
                                                        const CsWerOptions& opts = {});

// ---------------------------------------------------------------------------
// Corpus evaluation (the `eval` subcommand's payload)
// ---------------------------------------------------------------------------

struct UtteranceEval {
  std::string id;
  WerCounts word;
  WerCounts chars;
  std::size_t m = 0;
  std::size_t n = 0;
};

struct EvalReport {
  double wer = 0.0;
  double cer = 0.0;
  std::optional<double> cs_wer;  // empty when the corpus has no switch points
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<UtteranceEval> per_utterance;
};

/// refs and hyps are raw texts paired by position (callers pair by id).
EvalReport evaluate_corpus(const std::vector<std::string>& ids,
                           const std::vector<std::string>& refs,
                           const std::vector<std::string>& hyps,
                           const CsWerOptions& opts = {});

/// Splits on spaces, dropping empty tokens.
Words split_words(std::string_view text);

}  // namespace csasr

#endif  // CSASR_METRICS_HPP
