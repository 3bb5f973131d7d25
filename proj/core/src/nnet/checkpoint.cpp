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

#include "citysound/nnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "citysound/errors.hpp"

namespace citysound::nnet {
namespace {

constexpr char kMagic[4] = {'C', 'S', 'N', 'N'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void floats(std::span<const float> v) {
    for (float x : v) u32(std::bit_cast<std::uint32_t>(x));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint: truncated stream");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  void floats(std::vector<float>& out, std::size_t n) {
    if (n > (bytes_.size() - pos_) / 4) throw FormatError("checkpoint: truncated tensor");
    out.resize(n);
    for (auto& x : out) x = std::bit_cast<float>(u32());
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_layer(Writer& w, const LayerSpec& l) {
  w.u32(static_cast<std::uint32_t>(l.kind));
  w.i32(l.units);
  w.i32(l.window.h);
  w.i32(l.window.w);
  w.i32(l.stride);
  w.f64(l.rate);
}

LayerSpec read_layer(Reader& r) {
  LayerSpec l;
  const std::uint32_t kind = r.u32();
  if (kind < 1 || kind > 9) throw FormatError("checkpoint: unknown layer kind " + std::to_string(kind));
  l.kind = static_cast<LayerKind>(kind);
  l.units = r.i32();
  l.window.h = r.i32();
  l.window.w = r.i32();
  l.stride = r.i32();
  l.rate = r.f64();
  return l;
}

std::vector<LayerSpec> read_layers(Reader& r) {
  const std::uint32_t n = r.u32();
  std::vector<LayerSpec> layers;
  for (std::uint32_t i = 0; i < n; ++i) layers.push_back(read_layer(r));
  return layers;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::string_view tag, std::uint64_t seed,
                                            Network<float>& network,
                                            const Adam<float>& optimizer) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(tag);
  w.u64(seed);
  const NetworkSpec& spec = network.spec();
  w.u32(static_cast<std::uint32_t>(spec.input.h));
  w.u32(static_cast<std::uint32_t>(spec.input.w));
  w.u32(static_cast<std::uint32_t>(spec.input.c));
  w.u32(static_cast<std::uint32_t>(spec.trunk.size()));
  for (const auto& l : spec.trunk) write_layer(w, l);
  w.u32(static_cast<std::uint32_t>(spec.heads.size()));
  for (const auto& h : spec.heads) {
    w.str(h.name);
    w.u32(static_cast<std::uint32_t>(h.loss));
    w.f64(h.weight);
    w.u32(static_cast<std::uint32_t>(h.layers.size()));
    for (const auto& l : h.layers) write_layer(w, l);
  }

  const auto params = network.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.str(p->name);
    w.u8(p->trainable ? 1 : 0);
    w.u64(p->value.size());
    w.floats(p->value);
  }

  const AdamConfig& cfg = optimizer.config();
  w.f64(cfg.lr);
  w.f64(cfg.beta1);
  w.f64(cfg.beta2);
  w.f64(cfg.epsilon);
  w.f64(cfg.decay);
  w.u8(cfg.amsgrad ? 1 : 0);
  w.u64(optimizer.iterations());

  const auto& m = optimizer.first_moments();
  const auto& v = optimizer.second_moments();
  const auto& vmax = optimizer.max_second_moments();
  w.u32(static_cast<std::uint32_t>(m.size()));
  for (std::size_t k = 0; k < m.size(); ++k) {
    w.u64(m[k].size());
    w.floats(m[k]);
    w.floats(v[k]);
    if (cfg.amsgrad) w.floats(vmax[k]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string tag = r.str();
  const std::uint64_t seed = r.u64();
  NetworkSpec spec;
  spec.input.h = r.u32();
  spec.input.w = r.u32();
  spec.input.c = r.u32();
  spec.trunk = read_layers(r);
  const std::uint32_t n_heads = r.u32();
  for (std::uint32_t h = 0; h < n_heads; ++h) {
    HeadSpec head;
    head.name = r.str();
    const std::uint32_t loss = r.u32();
    if (loss != 1 && loss != 2) throw FormatError("checkpoint: unknown loss kind");
    head.loss = static_cast<LossKind>(loss);
    head.weight = r.f64();
    head.layers = read_layers(r);
    spec.heads.push_back(std::move(head));
  }

  Network<float> network = [&] {
    try {
      return Network<float>(spec, seed);
    } catch (const ContractError& e) {
      throw FormatError(std::string("checkpoint: invalid network description: ") + e.what());
    }
  }();
  const auto params = network.parameters();
  if (r.u32() != params.size()) throw FormatError("checkpoint: parameter count mismatch");
  for (auto* p : params) {
    if (r.str() != p->name) throw FormatError("checkpoint: parameter name mismatch");
    if ((r.u8() != 0) != p->trainable) throw FormatError("checkpoint: parameter kind mismatch");
    const std::uint64_t n = r.u64();
    if (n != p->value.size()) throw FormatError("checkpoint: parameter '" + p->name + "' size mismatch");
    r.floats(p->value, n);
  }

  AdamConfig cfg;
  cfg.lr = r.f64();
  cfg.beta1 = r.f64();
  cfg.beta2 = r.f64();
  cfg.epsilon = r.f64();
  cfg.decay = r.f64();
  cfg.amsgrad = r.u8() != 0;
  Adam<float> optimizer = [&] {
    try {
      return Adam<float>(cfg);
    } catch (const ConfigError& e) {
      throw FormatError(std::string("checkpoint: invalid optimizer config: ") + e.what());
    }
  }();
  optimizer.set_iterations(r.u64());
  const std::uint32_t n_moments = r.u32();
  std::size_t n_trainable = 0;
  for (const auto* p : params) n_trainable += p->trainable ? 1 : 0;
  if (n_moments != 0 && n_moments != n_trainable) throw FormatError("checkpoint: moment count mismatch");
  for (std::uint32_t k = 0; k < n_moments; ++k) {
    const std::uint64_t n = r.u64();
    r.floats(optimizer.first_moments().emplace_back(), n);
    r.floats(optimizer.second_moments().emplace_back(), n);
    if (cfg.amsgrad) r.floats(optimizer.max_second_moments().emplace_back(), n);
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return Checkpoint{std::move(tag), seed, std::move(network), std::move(optimizer)};
}

void save_checkpoint(const std::filesystem::path& path, std::string_view tag,
                     std::uint64_t seed, Network<float>& network,
                     const Adam<float>& optimizer) {
  const auto bytes = encode_checkpoint(tag, seed, network, optimizer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace citysound::nnet
