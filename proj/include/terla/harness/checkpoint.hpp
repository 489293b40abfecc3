#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "terla/numeric/parameters.hpp"

namespace terla::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  numeric::Shape shape;
  std::vector<float> data;

  bool operator==(const NamedTensor&) const = default;
};

// Binary layout, all integers little-endian:
//   "TERLACKP" | u32 version | u64 n + n bytes of JSON metadata |
//   u32 tensor count | per tensor: u32 n + name, u32 rank, u64 dims[rank],
//   float32 payload.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// One "name shape" line per tensor; equal manifests mean equal architectures.
std::string shape_manifest(const Checkpoint& ckpt);

std::vector<NamedTensor> capture_parameters(const numeric::ParameterStore<float>& store);
// Names and shapes must match the store exactly.
void restore_parameters(numeric::ParameterStore<float>& store, const std::vector<NamedTensor>& tensors);

}  // namespace terla::harness
