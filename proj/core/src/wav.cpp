// Copyright 2026 The citysound Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "citysound/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "citysound/errors.hpp"

namespace citysound::dataset {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

bool tag_is(const std::uint8_t* p, const char* tag) {
  return std::memcmp(p, tag, 4) == 0;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

FormatChunk parse_format(const std::uint8_t* p, std::uint32_t size) {
  if (size < 16) throw FormatError("wav: fmt chunk too short");
  FormatChunk fmt;
  fmt.format = read_u16(p);
  fmt.channels = read_u16(p + 2);
  fmt.sample_rate = read_u32(p + 4);
  fmt.block_align = read_u16(p + 12);
  fmt.bits = read_u16(p + 14);
  if (fmt.format == kFormatExtensible) {
    if (size < 40) throw FormatError("wav: truncated WAVE_FORMAT_EXTENSIBLE");
    // First two bytes of the subformat GUID carry the base format tag.
    fmt.format = read_u16(p + 24);
  }
  return fmt;
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes.data(), "RIFF") ||
      !tag_is(bytes.data() + 8, "WAVE")) {
    throw FormatError("wav: missing RIFF/WAVE header");
  }

  std::optional<FormatChunk> fmt;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Some writers leave a stale data size; accept a short final data chunk.
      if (tag_is(chunk, "data") && fmt) {
        data = bytes.data() + body;
        data_size = static_cast<std::uint32_t>(bytes.size() - body);
        break;
      }
      throw FormatError("wav: chunk extends past end of file");
    }
    if (tag_is(chunk, "fmt ")) {
      fmt = parse_format(bytes.data() + body, size);
    } else if (tag_is(chunk, "data")) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }

  if (!fmt) throw FormatError("wav: no fmt chunk");
  if (data == nullptr) throw FormatError("wav: no data chunk");
  if (fmt->format != kFormatPcm) {
    throw UnsupportedError("wav: only integer PCM is supported (format tag " +
                           std::to_string(fmt->format) + ")");
  }
  if (fmt->bits != 16 && fmt->bits != 24) {
    throw UnsupportedError("wav: unsupported bit depth " +
                           std::to_string(fmt->bits));
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    throw UnsupportedError("wav: unsupported channel count " +
                           std::to_string(fmt->channels));
  }
  if (fmt->sample_rate == 0) throw FormatError("wav: zero sample rate");

  const std::size_t bytes_per_sample = fmt->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  if (fmt->block_align != frame_bytes) {
    throw FormatError("wav: block align does not match channels and bit depth");
  }
  if (data_size % frame_bytes != 0) throw FormatError("wav: data chunk ends inside a sample frame");
  const std::size_t n_frames = data_size / frame_bytes;
  const double scale = 1.0 / static_cast<double>(1u << (fmt->bits - 1));

  auto sample_at = [&](const std::uint8_t* p) -> std::int32_t {
    if (bytes_per_sample == 2) {
      return static_cast<std::int16_t>(read_u16(p));
    }
    std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
    if (v & 0x800000) v -= 0x1000000;
    return v;
  };

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const std::uint8_t* frame = data + i * frame_bytes;
    double acc = 0.0;
    for (std::size_t ch = 0; ch < fmt->channels; ++ch) {
      acc += sample_at(frame + ch * bytes_per_sample);
    }
    clip.samples[i] = static_cast<float>(acc / fmt->channels * scale);
  }
  return clip;
}

AudioClip decode_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    AudioClip clip = decode_wav(bytes);
    try {
      clip.meta = parse_clip_name(path.filename().string());
      clip.meta->path = path;
    } catch (const DataError&) {
      // Files outside the corpus naming convention decode without metadata.
    }
    return clip;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved,
                                     int channels, int sample_rate, int bits) {
  if (bits != 16 && bits != 24) {
    throw UnsupportedError("wav: unsupported bit depth " + std::to_string(bits));
  }
  if (channels != 1 && channels != 2) {
    throw UnsupportedError("wav: unsupported channel count " +
                           std::to_string(channels));
  }
  if (interleaved.size() % static_cast<std::size_t>(channels) != 0) {
    throw ShapeError("wav: sample count is not a multiple of channel count");
  }
  const std::uint32_t bytes_per_sample = static_cast<std::uint32_t>(bits / 8);
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(interleaved.size()) * bytes_per_sample;
  const double full_scale = static_cast<double>(1 << (bits - 1));
  const double max_code = full_scale - 1.0;

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * channels * bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
  put_u16(out, static_cast<std::uint16_t>(bits));
  put_tag(out, "data");
  put_u32(out, data_size);
  for (float x : interleaved) {
    const double code = std::clamp(std::nearbyint(static_cast<double>(x) * full_scale),
                                   -full_scale, max_code);
    const auto v = static_cast<std::int32_t>(code);
    for (std::uint32_t b = 0; b < bytes_per_sample; ++b) {
      out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path,
               std::span<const float> interleaved, int channels,
               int sample_rate, int bits) {
  const auto bytes = encode_wav(interleaved, channels, sample_rate, bits);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace citysound::dataset
