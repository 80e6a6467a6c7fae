// Copyright 2026-present the trimodal authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <filesystem>
#include <string>

#include "trimodal/encoder.hpp"

namespace trimodal {

/// Checkpoint layout (all little-endian):
///   magic "TRIMCKPT", u32 format version,
///   i32 dim, layers, heads, max_seq_len, vocab_size, u64 seed,
///   u32 tensor count, then per tensor: name (u32 length + bytes),
///   u64 rows, u64 cols, rows*cols f64 in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const EncoderParams& params);
EncoderParams deserialize_checkpoint(std::string_view bytes, const std::string& context);

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);

/// Throws DataError on a missing file, bad magic, other format versions,
/// or tensors whose names or shapes disagree with the stored config.
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace trimodal
