#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ualign/adapter/adapter.hpp"
#include "ualign/numerics/tensor.hpp"

namespace ualign {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Container layout (all integers little-endian):
//   "UALN" | u32 version | section name | u32 n_attr { key, i64 } |
//   u32 n_tensor { name, u32 rank, u64 dims[rank], u64 offset } |
//   u64 n_values | n_values x f64
// Strings are u32 length + bytes. Offsets count doubles from the start of
// the value block.
struct Checkpoint {
  std::string section;
  std::vector<std::pair<std::string, std::int64_t>> attributes;
  std::vector<Tensor> tensors;

  std::optional<std::int64_t> attribute(const std::string& key) const;
  std::int64_t require_attribute(const std::string& key) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

inline constexpr const char* kAdapterSection = "adapter";

Checkpoint adapter_to_checkpoint(const AdapterParams& params);
AdapterParams adapter_from_checkpoint(const Checkpoint& ckpt);

void checkpoint_save(const AdapterParams& params, const std::filesystem::path& path);
AdapterParams checkpoint_load(const std::filesystem::path& path);

}  // namespace ualign
