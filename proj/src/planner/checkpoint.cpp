// Copyright 2026 The selfd Authors
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

#include "selfd/planner/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

namespace selfd::planner {
namespace fs = std::filesystem;

namespace {
constexpr char kMagic[8] = {'S', 'E', 'L', 'F', 'D', 'C', 'K', 'P'};

template <typename U>
void write_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U read_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  in.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (!in) throw CheckpointError("truncated checkpoint header");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}
}  // namespace

void save_checkpoint(const fs::path& path, const Planner& model, const CheckpointMeta& meta) {
  nlohmann::json header;
  header["config"] = model.config();
  header["variant"] = std::string(variant_name(model.config().variant));
  header["step"] = meta.step;
  header["tag"] = meta.tag;
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.parameters()) {
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value.size()) * sizeof(float);
  }
  header["tensors"] = std::move(tensors);
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kCheckpointVersion);
    write_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.parameters()) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        std::uint32_t bits;
        const float v = p.value.data()[i];
        std::memcpy(&bits, &v, sizeof bits);
        write_le<std::uint32_t>(out, bits);
      }
    }
    if (!out) throw CheckpointError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path, const std::optional<PlannerConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw CheckpointError("not a checkpoint: " + path.string());
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported: " + path.string());
  }
  const auto len = read_le<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("truncated checkpoint header: " + path.string());
  const auto header = nlohmann::json::parse(text);
  const auto config = header.at("config").get<PlannerConfig>();
  if (expected && !(*expected == config)) {
    throw CheckpointError("checkpoint config does not match the expected planner config: " + path.string());
  }
  Planner model(config, 0);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != model.parameters().size()) throw CheckpointError("tensor count mismatch: " + path.string());
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto& p = model.parameters()[t];
    const auto& tj = tensors[t];
    if (tj.at("name").get<std::string>() != p.name || tj.at("rows").get<long>() != p.value.rows() ||
        tj.at("cols").get<long>() != p.value.cols()) {
      throw CheckpointError("tensor layout mismatch at '" + p.name + "': " + path.string());
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const auto bits = read_le<std::uint32_t>(in);
      float v;
      std::memcpy(&v, &bits, sizeof v);
      p.value.data()[i] = v;
    }
  }
  LoadedCheckpoint out{std::move(model), {}};
  out.meta.step = header.value("step", 0L);
  out.meta.tag = header.value("tag", std::string());
  return out;
}

std::string model_id(const Planner& model) { return core::hex64(model.fingerprint()); }

}  // namespace selfd::planner
