// SPDX-License-Identifier: Apache-2.0
#include "nn/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "core/error.hpp"

namespace mvsync {

namespace {

constexpr char kMagic[8] = {'M', 'V', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DecodeError("checkpoint: truncated file " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(ckpt.kind));
  put<uint64_t>(out, ckpt.step);
  put<uint64_t>(out, ckpt.config_hash);
  put<uint64_t>(out, ckpt.dataset_hash);
  put<uint64_t>(out, ckpt.rng_state.size());
  out.write(ckpt.rng_state.data(),
            static_cast<std::streamsize>(ckpt.rng_state.size()));
  put<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, data] : ckpt.tensors) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint64_t>(out, data.size());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DecodeError("checkpoint: bad magic in " + path);
  uint32_t version = get<uint32_t>(in, path);
  if (version != kVersion)
    throw DecodeError("checkpoint: unsupported version in " + path);
  Checkpoint ckpt;
  ckpt.kind = static_cast<CheckpointKind>(get<uint32_t>(in, path));
  ckpt.step = get<uint64_t>(in, path);
  ckpt.config_hash = get<uint64_t>(in, path);
  ckpt.dataset_hash = get<uint64_t>(in, path);
  uint64_t rng_len = get<uint64_t>(in, path);
  if (rng_len > (1u << 20))
    throw DecodeError("checkpoint: implausible state size in " + path);
  ckpt.rng_state.resize(rng_len);
  in.read(ckpt.rng_state.data(), static_cast<std::streamsize>(rng_len));
  uint32_t n_tensors = get<uint32_t>(in, path);
  ckpt.tensors.reserve(n_tensors);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    uint32_t name_len = get<uint32_t>(in, path);
    if (name_len > 4096)
      throw DecodeError("checkpoint: implausible name length in " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint64_t count = get<uint64_t>(in, path);
    std::vector<float> data(count);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw DecodeError("checkpoint: truncated tensor in " + path);
    ckpt.tensors.emplace_back(std::move(name), std::move(data));
  }
  return ckpt;
}

void pack_state(Checkpoint& ckpt, const StateDict<float>& dict) {
  for (const auto& e : dict) ckpt.tensors.emplace_back(e.name, *e.data);
}

void unpack_state(const Checkpoint& ckpt, const StateDict<float>& dict) {
  for (const auto& e : dict) {
    const std::vector<float>* src = ckpt.find(e.name);
    if (!src) throw StructureError("checkpoint: missing tensor " + e.name);
    if (src->size() != e.data->size())
      throw StructureError("checkpoint: size mismatch for " + e.name);
    *e.data = *src;
  }
}

}  // namespace mvsync
