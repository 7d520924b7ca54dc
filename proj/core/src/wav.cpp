#include "squashloc/wav.hpp"

#include "squashloc/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace squashloc {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

AudioBlock read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open audio file '" + path + "'");
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) { return DataError("'" + path + "': " + why); };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    const std::size_t size = le32(hdr + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, buf.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw fail("fmt chunk too short");
      const unsigned char* f = buf.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
      if (format == kFormatExtensible) {
        if (avail < 26) throw fail("extensible fmt chunk too short");
        format = le16(f + 24);  // first two bytes of the subformat GUID
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = buf.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (channels == 0 || rate == 0) throw fail("missing or invalid fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");

  const std::size_t bytes = bits / 8;
  const bool ok = (format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32)) ||
                  (format == kFormatFloat && bits == 32);
  if (!ok) {
    throw fail("unsupported sample format (tag " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits)");
  }
  const std::size_t frames = data_size / (bytes * channels);

  AudioBlock block;
  block.sample_rate = rate;
  block.samples.assign(channels, std::vector<float>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (n * channels + c) * bytes;
      double v = 0.0;
      if (format == kFormatFloat) {
        v = std::bit_cast<float>(le32(p));
        if (!std::isfinite(v)) throw fail("non-finite float sample");
        v = std::clamp(v, -1.0, 1.0);
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = p[0] | p[1] << 8 | p[2] << 16;
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(le32(p)) / 2147483648.0;
      }
      block.samples[c][n] = static_cast<float>(v);
    }
  }
  return block;
}

void write_wav(const std::string& path, const AudioBlock& audio, WavFormat format) {
  audio.validate();
  const std::uint16_t channels = static_cast<std::uint16_t>(audio.channels());
  const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : format == WavFormat::pcm24 ? 24 : 32;
  const std::uint16_t tag = format == WavFormat::float32 ? kFormatFloat : kFormatPcm;
  const std::size_t bytes = bits / 8;
  const std::size_t frames = audio.frames();
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));

  std::string out;
  const std::size_t data_size = frames * channels * bytes;
  out.reserve(44 + data_size);
  out += "RIFF";
  put32(out, static_cast<std::uint32_t>(36 + data_size));
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, tag);
  put16(out, channels);
  put32(out, rate);
  put32(out, static_cast<std::uint32_t>(rate * channels * bytes));
  put16(out, static_cast<std::uint16_t>(channels * bytes));
  put16(out, bits);
  out += "data";
  put32(out, static_cast<std::uint32_t>(data_size));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = audio.samples[c][n];
      if (format == WavFormat::float32) {
        put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else if (format == WavFormat::pcm16) {
        const auto s = static_cast<std::int32_t>(std::clamp(std::lround(v * 32768.0), -32768L, 32767L));
        put16(out, static_cast<std::uint16_t>(s));
      } else {
        const auto s = static_cast<std::int32_t>(std::clamp(std::lround(v * 8388608.0), -8388608L, 8388607L));
        out.push_back(static_cast<char>(s & 0xFF));
        out.push_back(static_cast<char>((s >> 8) & 0xFF));
        out.push_back(static_cast<char>((s >> 16) & 0xFF));
      }
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write audio file '" + path + "'");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("failed writing audio file '" + path + "'");
}

AudioBlock ingest(const std::vector<std::string>& paths, const IngestExpectation& expect) {
  if (paths.empty()) throw ConfigError("no input audio given");
  AudioBlock block;
  if (paths.size() == 1) {
    block = read_wav(paths.front());
  } else {
    for (std::size_t i = 0; i < paths.size(); ++i) {
      AudioBlock mono = read_wav(paths[i]);
      if (mono.channels() != 1) {
        throw DataError("ingestion error (channels): '" + paths[i] + "' is not mono");
      }
      if (i == 0) {
        block.sample_rate = mono.sample_rate;
      } else if (mono.sample_rate != block.sample_rate) {
        throw DataError("ingestion error (sample_rate): '" + paths[i] + "' rate differs");
      } else if (mono.frames() != block.frames()) {
        throw DataError("ingestion error (length): '" + paths[i] + "' length differs");
      }
      block.samples.push_back(std::move(mono.samples.front()));
    }
  }
  if (expect.channels && block.channels() != *expect.channels) {
    throw DataError("ingestion error (channels): audio has " + std::to_string(block.channels()) +
                    " channels, configuration expects " + std::to_string(*expect.channels));
  }
  if (expect.sample_rate && block.sample_rate != *expect.sample_rate) {
    throw DataError("ingestion error (sample_rate): audio is " + std::to_string(block.sample_rate) +
                    " Hz, configuration expects " + std::to_string(*expect.sample_rate) + " Hz");
  }
  return block;
}

}  // namespace squashloc
