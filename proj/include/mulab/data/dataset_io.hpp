#pragma once

#include <filesystem>
#include <iosfwd>

#include "mulab/data/dataset.hpp"

namespace mulab::data {

// Binary dataset file, all integers and floats little-endian:
//
//   "UNDS" | u32 version | u8 task tag (0 single-label, 1 multi-label)
//   | u32 classes-or-labels | u32 feature rank | rank x u32 dims
//   | u64 sample count
//   then per sample:
//   u64 id | u64 patient_id | u8 group
//   | label payload: u32 class index, or one u8 per label (0, 1, 2 = Unknown)
//   | u64 feature count | f32 features
//
// Files with zero samples are rejected on read.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void write_dataset(std::ostream& os, const LabeledDataset& ds);
LabeledDataset read_dataset(std::istream& is);

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

}  // namespace mulab::data
