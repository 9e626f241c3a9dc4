#pragma once

#include <filesystem>

#include "meca/nn.hpp"

namespace meca::nn {

// Binary little-endian checkpoint:
//   "MECA" | version u32 | tensor count u32 |
//   per tensor: name length u16, UTF-8 name, rank u8, dims u32 x rank, f64 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace meca::nn
