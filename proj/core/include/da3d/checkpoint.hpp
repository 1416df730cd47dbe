#pragma once

// Checkpoint container. Layout (integers little-endian):
//   "DA3C"                      magic
//   u32 version = 1
//   u64 seed
//   u32 n, n bytes              config echo, UTF-8 JSON
//   u32 tensor_count
//   per tensor:
//     u32 n, n bytes            name
//     u32 rank, rank x u32      dims
//     prod(dims) x float32      payload, row-major
// Tensors appear in for_each_tensor order. docs/formats.md has the
// full description.

#include <cstdint>
#include <filesystem>
#include <string>

#include "da3d/model.hpp"

namespace da3d {

struct Checkpoint {
  ModelParams<float> params;
  std::string config_json;
  std::uint64_t seed = 0;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace da3d
