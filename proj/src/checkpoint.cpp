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
#include "trimodal/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "trimodal/binary_io.hpp"
#include "trimodal/error.hpp"
#include "trimodal/file_util.hpp"

namespace trimodal {
namespace {
constexpr std::string_view kMagic = "TRIMCKPT";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string serialize_checkpoint(const EncoderParams& params) {
  binio::Writer w;
  w.put_bytes(kMagic);
  w.put(kCheckpointVersion);
  const auto& c = params.config;
  w.put(static_cast<std::int32_t>(c.dim));
  w.put(static_cast<std::int32_t>(c.layers));
  w.put(static_cast<std::int32_t>(c.heads));
  w.put(static_cast<std::int32_t>(c.max_seq_len));
  w.put(static_cast<std::int32_t>(c.vocab_size));
  w.put(c.seed);
  std::uint32_t count = 0;
  params.weights.for_each([&](const std::string&, const auto&) { ++count; });
  w.put(count);
  params.weights.for_each([&](const std::string& name, const auto& t) {
    w.put_string(name);
    w.put(static_cast<std::uint64_t>(t.rows()));
    w.put(static_cast<std::uint64_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) w.put(static_cast<double>(t(i, j)));
    }
  });
  return w.bytes();
}

EncoderParams deserialize_checkpoint(std::string_view bytes, const std::string& context) {
  binio::Reader r(bytes, context);
  if (r.get_bytes(kMagic.size()) != kMagic) throw DataError(context + ": not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError(context + ": unsupported checkpoint version " + std::to_string(version));
  }
  EncoderConfig cfg;
  cfg.dim = r.get<std::int32_t>();
  cfg.layers = r.get<std::int32_t>();
  cfg.heads = r.get<std::int32_t>();
  cfg.max_seq_len = r.get<std::int32_t>();
  cfg.vocab_size = r.get<std::int32_t>();
  cfg.seed = r.get<std::uint64_t>();
  try {
    cfg.validate();
  } catch (const UsageError& e) {
    throw DataError(context + ": " + e.what());
  }
  // Shapes come from a fresh init of the stored config; each stored tensor
  // must match name and shape exactly.
  EncoderParams params = init_encoder(cfg);
  std::uint32_t expected = 0;
  params.weights.for_each([&](const std::string&, const auto&) { ++expected; });
  const auto count = r.get<std::uint32_t>();
  if (count != expected) {
    throw DataError(context + ": expected " + std::to_string(expected) + " tensors, found " +
                    std::to_string(count));
  }
  params.weights.for_each([&](const std::string& name, auto& t) {
    const std::string stored = r.get_string();
    if (stored != name) throw DataError(context + ": expected tensor " + name + ", found " + stored);
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(t.rows()) || cols != static_cast<std::uint64_t>(t.cols())) {
      throw DataError(context + ": shape mismatch for " + name);
    }
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = r.get<double>();
    }
  });
  if (r.remaining() != 0) throw DataError(context + ": trailing bytes after last tensor");
  return params;
}

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(params));
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("checkpoint not found: " + path.string());
  return deserialize_checkpoint(read_file(path), path.string());
}

}  // namespace trimodal
