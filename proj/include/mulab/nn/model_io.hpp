#pragma once

#include <filesystem>
#include <iosfwd>

#include "mulab/nn/model.hpp"

namespace mulab::nn {

// Binary model file:
//   "UNFG" | u32 version | u64 n + n bytes of canonical ArchSpec JSON
//   | u64 n + n f64 params | u64 n + n f64 BatchNorm statistics
// BatchNorm statistics are concatenated per layer in layer order, running
// mean then running variance. All integers and floats little-endian.
inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_model(std::ostream& os, const ModelState& model);
ModelState read_model(std::istream& is);

void save_model(const ModelState& model, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);

}  // namespace mulab::nn
