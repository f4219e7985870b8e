// csasr/io.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_IO_HPP
#define CSASR_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "csasr/features.hpp"

namespace csasr {

// Feature files: little-endian binary, magic "CSFK", u32 version=1,
// u32 frames, u32 dims, then frames*dims float32 row-major. Bit-exact:
// write(read(f)) reproduces f byte for byte.

FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMatrix& m);

/// One line of a JSONL manifest, before features are loaded.
struct ManifestRecord {
  std::string id;
  std::string features_path;  // relative to the manifest directory
  std::string transcript;     // raw text
  SampleKind kind = SampleKind::kReal;
};

std::vector<ManifestRecord> read_manifest_records(const std::filesystem::path& manifest);

/// Loads a manifest and every referenced feature file. Dims must be uniform
/// across the corpus; ids unique; transcripts non-empty. Record order is the
/// file order.
std::vector<Utterance> load_manifest(const std::filesystem::path& manifest,
                                     const Vocabulary& vocab);

/// Writes dir/manifest.jsonl plus dir/feats/<id>.csfk for a corpus.
void write_corpus(const std::filesystem::path& dir, const std::vector<Utterance>& corpus,
                  const Vocabulary& vocab);

struct Hypothesis {
  std::string id;
  std::string text;
};

/// Reads {"id","hyp"} JSONL; also accepts manifest records (uses "transcript").
std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path);
void write_hypotheses(const std::filesystem::path& path, const std::vector<Hypothesis>& hyps);

}  // namespace csasr

#endif  // CSASR_IO_HPP
