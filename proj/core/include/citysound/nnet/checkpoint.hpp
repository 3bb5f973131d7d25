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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "citysound/nnet/adam.hpp"
#include "citysound/nnet/network.hpp"

namespace citysound::nnet {

// Model checkpoint, little-endian throughout:
//
//   "CSNN" | version u32
//   | tag: u32 length + bytes | seed u64
//   | input h, w, c: u32 x3
//   | trunk: u32 count + layer records
//   | heads: u32 count + per head (name string | loss u32 | weight f64
//            | u32 count + layer records)
//   | parameters: u32 count + per tensor (name string | trainable u8
//                 | u64 length | float32 values)
//   | Adam config: lr, beta1, beta2, epsilon, decay as f64 | amsgrad u8
//   | step counter u64
//   | moments: u32 count + per trainable tensor (u64 length | m | v
//              [| v_max when amsgrad]) all float32
//
// A layer record is kind u32 | units i32 | window h, w i32 | stride i32
// | rate f64.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string tag;
  std::uint64_t seed = 0;
  Network<float> network;
  Adam<float> optimizer;
};

std::vector<std::uint8_t> encode_checkpoint(std::string_view tag, std::uint64_t seed,
                                            Network<float>& network,
                                            const Adam<float>& optimizer);
// Throws FormatError on a corrupt or truncated stream.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, std::string_view tag,
                     std::uint64_t seed, Network<float>& network,
                     const Adam<float>& optimizer);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace citysound::nnet
