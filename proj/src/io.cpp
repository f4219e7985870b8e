// csasr/io.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#include "csasr/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace csasr {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'F', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "feature files are little-endian; a byte-swapping reader is not implemented");

void put_u32(std::string& out, std::uint32_t x) {
  char buf[4];
  std::memcpy(buf, &x, 4);
  out.append(buf, 4);
}

std::uint32_t get_u32(const std::string& buf, std::size_t& off) {
  std::uint32_t x;
  std::memcpy(&x, buf.data() + off, 4);
  off += 4;
  return x;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

FeatureMatrix read_features(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFeatureFile(path.string());
  std::string buf = slurp(path);
  const std::string name = path.filename().string();
  if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw MalformedRecord("bad feature-file magic in " + name);
  std::size_t off = 4;
  std::uint32_t version = get_u32(buf, off);
  if (version != kVersion)
    throw MalformedRecord("unsupported feature-file version " + std::to_string(version) +
                          " in " + name);
  std::uint32_t frames = get_u32(buf, off);
  std::uint32_t dims = get_u32(buf, off);
  if (frames < 1 || dims < 1)
    throw MalformedRecord("empty feature matrix in " + name);
  const std::size_t payload = static_cast<std::size_t>(frames) * dims * sizeof(float);
  if (buf.size() - off != payload)
    throw MalformedRecord("truncated feature payload in " + name + ": expected " +
                          std::to_string(payload) + " bytes, found " +
                          std::to_string(buf.size() - off));
  FeatureMatrix m(frames, dims);
  std::memcpy(m.data.data(), buf.data() + off, payload);
  for (float x : m.data)
    if (!std::isfinite(x)) throw MalformedRecord("non-finite feature value in " + name);
  return m;
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::string buf;
  buf.reserve(16 + m.data.size() * sizeof(float));
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(m.frames));
  put_u32(buf, static_cast<std::uint32_t>(m.dims));
  buf.append(reinterpret_cast<const char*>(m.data.data()), m.data.size() * sizeof(float));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("short write: " + path.string());
}

std::vector<ManifestRecord> read_manifest_records(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open manifest: " + manifest.string());
  std::vector<ManifestRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(std::string("invalid JSON: ") + e.what(), line_no);
    }
    ManifestRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.features_path = j.at("features").get<std::string>();
      r.transcript = j.at("transcript").get<std::string>();
      std::string kind = j.at("kind").get<std::string>();
      if (kind == "real")
        r.kind = SampleKind::kReal;
      else if (kind == "tts")
        r.kind = SampleKind::kTts;
      else
        throw MalformedRecord("kind must be \"real\" or \"tts\", got \"" + kind + "\"", line_no);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(std::string("missing or mistyped field: ") + e.what(), line_no);
    }
    if (r.transcript.empty()) throw MalformedRecord("empty transcript for id " + r.id, line_no);
    if (!ids.insert(r.id).second) throw MalformedRecord("duplicate id " + r.id, line_no);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<Utterance> load_manifest(const std::filesystem::path& manifest,
                                     const Vocabulary& vocab) {
  const std::filesystem::path base = manifest.parent_path();
  std::vector<ManifestRecord> records = read_manifest_records(manifest);
  std::vector<Utterance> corpus;
  corpus.reserve(records.size());
  std::size_t expected_dims = 0;
  for (const ManifestRecord& r : records) {
    Utterance u;
    u.id = r.id;
    u.kind = r.kind;
    u.features = read_features(base / r.features_path);
    if (expected_dims == 0)
      expected_dims = u.features.dims;
    else if (u.features.dims != expected_dims)
      throw DimMismatch(expected_dims, u.features.dims, u.id);
    u.transcript = encode_transcript(vocab, r.transcript);
    corpus.push_back(std::move(u));
  }
  return corpus;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<Utterance>& corpus,
                  const Vocabulary& vocab) {
  std::filesystem::create_directories(dir / "feats");
  std::ofstream out(dir / "manifest.jsonl", std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + (dir / "manifest.jsonl").string());
  for (const Utterance& u : corpus) {
    const std::string rel = "feats/" + u.id + ".csfk";
    write_features(dir / rel, u.features);
    nlohmann::ordered_json j;
    j["id"] = u.id;
    j["features"] = rel;
    j["transcript"] = transcript_to_text(vocab, u.transcript);
    j["kind"] = u.kind == SampleKind::kReal ? "real" : "tts";
    out << j.dump() << "\n";
  }
}

std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  std::vector<Hypothesis> hyps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      Hypothesis h;
      h.id = j.at("id").get<std::string>();
      if (j.contains("hyp"))
        h.text = j.at("hyp").get<std::string>();
      else
        h.text = j.at("transcript").get<std::string>();
      hyps.push_back(std::move(h));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(std::string("invalid hypothesis record: ") + e.what(), line_no);
    }
  }
  return hyps;
}

void write_hypotheses(const std::filesystem::path& path, const std::vector<Hypothesis>& hyps) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  for (const Hypothesis& h : hyps) {
    nlohmann::ordered_json j;
    j["id"] = h.id;
    j["hyp"] = h.text;
    out << j.dump() << "\n";
  }
}

}  // namespace csasr
