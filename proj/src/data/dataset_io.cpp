#include "mulab/data/dataset_io.hpp"

#include <fstream>

#include "mulab/binary_io.hpp"
#include "mulab/error.hpp"

namespace mulab::data {

namespace {
constexpr char kMagic[5] = "UNDS";
}

void write_dataset(std::ostream& os, const LabeledDataset& ds) {
    validate(ds);
    if (ds.empty()) throw DataError("refusing to write a dataset with no samples");
    binio::write_magic(os, kMagic);
    binio::write_le(os, kDatasetFormatVersion);
    binio::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(ds.task.type));
    binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.task.count));
    binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.feature_shape.size()));
    for (auto d : ds.feature_shape) binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    binio::write_le<std::uint64_t>(os, ds.samples.size());
    for (const auto& s : ds.samples) {
        binio::write_le(os, s.id);
        binio::write_le(os, s.patient_id);
        binio::write_le(os, s.group);
        if (ds.task.is_single()) {
            binio::write_le(os, s.class_index);
        } else {
            for (auto b : s.labels) binio::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(b));
        }
        binio::write_le<std::uint64_t>(os, s.features.size());
        for (float v : s.features) binio::write_le(os, v);
    }
    if (!os) throw Error("failed writing dataset");
}

LabeledDataset read_dataset(std::istream& is) {
    binio::expect_magic(is, kMagic);
    const auto version = binio::read_le<std::uint32_t>(is, "format version");
    if (version != kDatasetFormatVersion) {
        throw FormatError("unsupported dataset format version " + std::to_string(version));
    }
    LabeledDataset ds;
    const auto tag = binio::read_le<std::uint8_t>(is, "task tag");
    if (tag > 1) throw FormatError("unknown task tag " + std::to_string(tag));
    ds.task.type = static_cast<TaskType>(tag);
    ds.task.count = binio::read_le<std::uint32_t>(is, "class count");
    const auto rank = binio::read_le<std::uint32_t>(is, "feature rank");
    if (rank == 0 || rank > 8) throw FormatError("implausible feature rank " + std::to_string(rank));
    for (std::uint32_t i = 0; i < rank; ++i) ds.feature_shape.push_back(binio::read_le<std::uint32_t>(is, "feature shape"));
    const auto count = binio::read_le<std::uint64_t>(is, "sample count");
    if (count == 0) throw FormatError("dataset file contains no samples");
    const std::size_t fs = ds.feature_size();
    ds.samples.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t k = 0; k < count; ++k) {
        Sample s;
        s.id = binio::read_le<std::uint64_t>(is, "sample id");
        s.patient_id = binio::read_le<std::uint64_t>(is, "patient id");
        s.group = binio::read_le<std::uint8_t>(is, "group");
        if (ds.task.is_single()) {
            s.class_index = binio::read_le<std::uint32_t>(is, "class index");
        } else {
            s.labels.resize(ds.task.count);
            for (auto& b : s.labels) {
                const auto raw = binio::read_le<std::uint8_t>(is, "label");
                if (raw > 2) throw FormatError("invalid label byte " + std::to_string(raw));
                b = static_cast<LabelBit>(raw);
            }
        }
        const auto nf = binio::read_le<std::uint64_t>(is, "feature count");
        if (nf != fs) throw FormatError("sample " + std::to_string(s.id) + " has the wrong feature count");
        s.features.resize(fs);
        for (auto& v : s.features) v = binio::read_le<float>(is, "features");
        ds.samples.push_back(std::move(s));
    }
    try {
        validate(ds);
    } catch (const DataError& e) {
        throw FormatError(std::string("dataset file is inconsistent: ") + e.what());
    }
    return ds;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_dataset(os, ds);
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    LabeledDataset ds = read_dataset(is);
    ds.provenance = path.string();
    return ds;
}

}  // namespace mulab::data
