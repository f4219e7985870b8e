// csasr/errors.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0

#ifndef CSASR_ERRORS_HPP
#define CSASR_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csasr {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A transcript contains a codepoint outside the supported classes
/// (Devanagari, Latin letters, digits, space).
class UnsupportedCodepoint : public Error {
 public:
  UnsupportedCodepoint(char32_t cp, std::size_t position, const std::string& context = "")
      : Error("unsupported codepoint U+" + to_hex(cp) + " at position " +
              std::to_string(position) + (context.empty() ? "" : " in " + context)),
        codepoint(cp),
        position(position) {}

  char32_t codepoint;
  std::size_t position;

 private:
  static std::string to_hex(char32_t cp) {
    static const char* digits = "0123456789ABCDEF";
    std::string out;
    for (int shift = 28; shift >= 0; shift -= 4) {
      unsigned nibble = (static_cast<unsigned>(cp) >> shift) & 0xFu;
      if (!out.empty() || nibble != 0 || shift < 16) out.push_back(digits[nibble]);
    }
    return out;
  }
};

/// A manifest entry points at a feature file that does not exist.
class MissingFeatureFile : public Error {
 public:
  explicit MissingFeatureFile(const std::string& path)
      : Error("missing feature file: " + path), path(path) {}
  std::string path;
};

/// Feature dimensionality differs from the corpus-wide value.
class DimMismatch : public Error {
 public:
  DimMismatch(std::size_t expected, std::size_t got, const std::string& id)
      : Error("feature dim mismatch for '" + id + "': expected " + std::to_string(expected) +
              ", got " + std::to_string(got)),
        expected(expected),
        got(got),
        id(id) {}
  std::size_t expected;
  std::size_t got;
  std::string id;
};

/// A manifest line or binary payload that cannot be parsed.
class MalformedRecord : public Error {
 public:
  explicit MalformedRecord(const std::string& what, std::size_t line_no = 0)
      : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what : what),
        line_no(line_no) {}
  std::size_t line_no;
};

/// lambda_mix outside [0.5, 1].
class InvalidLambda : public Error {
 public:
  explicit InvalidLambda(double value)
      : Error("lambda_mix must lie in [0.5, 1], got " + std::to_string(value)), value(value) {}
  double value;
};

class EmptyRealPool : public Error {
 public:
  EmptyRealPool() : Error("real pool is empty; nothing to mix with") {}
};

/// Label sequence cannot be emitted in the available time steps.
class LabelTooLong : public Error {
 public:
  LabelTooLong(std::size_t t, std::size_t needed)
      : Error("label sequence needs at least " + std::to_string(needed) +
              " frames, posterior has " + std::to_string(t)),
        t(t),
        needed(needed) {}
  std::size_t t;
  std::size_t needed;
};

class EmptyPosterior : public Error {
 public:
  EmptyPosterior() : Error("posterior sequence has zero timesteps") {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t got, std::size_t expected)
      : Error("posterior length " + std::to_string(got) + " does not match expected " +
              std::to_string(expected)),
        got(got),
        expected(expected) {}
  std::size_t got;
  std::size_t expected;
};

/// Corpus-level switch-point count is zero; CS-WER is undefined.
class NoSwitchPoints : public Error {
 public:
  NoSwitchPoints() : Error("no switch points in reference corpus; CS-WER undefined") {}
};

class MissingCheckpoint : public Error {
 public:
  explicit MissingCheckpoint(const std::string& path)
      : Error("checkpoint not found: " + path), path(path) {}
  std::string path;
};

class MissingTTSCorpus : public Error {
 public:
  MissingTTSCorpus() : Error("configuration requires a TTS corpus but none was given") {}
};

}  // namespace csasr

#endif  // CSASR_ERRORS_HPP
