#pragma once

#include "squashloc/signal.hpp"

#include <optional>
#include <string>
#include <vector>

namespace squashloc {

enum class WavFormat { pcm16, pcm24, float32 };

/// Reads PCM 16/24/32-bit or IEEE float 32-bit RIFF/WAVE data, normalized so
/// that integer full scale maps to [-1, 1) (e.g. 32767 -> 32767/32768).
AudioBlock read_wav(const std::string& path);

void write_wav(const std::string& path, const AudioBlock& audio, WavFormat format = WavFormat::pcm16);

/// Shape the caller expects; mismatches raise a DataError naming the field.
struct IngestExpectation {
  std::optional<std::size_t> channels;
  std::optional<double> sample_rate;
};

/// One multichannel file, or several mono files (one per channel, in order)
/// with identical length and rate.
AudioBlock ingest(const std::vector<std::string>& paths, const IngestExpectation& expect = {});

}  // namespace squashloc
