#include "mulab/nn/model_io.hpp"

#include <fstream>

#include "mulab/binary_io.hpp"
#include "mulab/error.hpp"

namespace mulab::nn {

namespace {

constexpr char kMagic[5] = "UNFG";
// Guards against allocating absurd buffers from a corrupted length field.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

std::vector<double> read_f64_array(std::istream& is, const char* what) {
    const auto n = binio::read_le<std::uint64_t>(is, what);
    if (n > kMaxElements) throw FormatError(std::string("implausible length for ") + what);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = binio::read_le<double>(is, what);
    return out;
}

void write_f64_array(std::ostream& os, const std::vector<double>& values) {
    binio::write_le<std::uint64_t>(os, values.size());
    for (double v : values) binio::write_le(os, v);
}

}  // namespace

void write_model(std::ostream& os, const ModelState& model) {
    binio::write_magic(os, kMagic);
    binio::write_le(os, kModelFormatVersion);
    const std::string arch = canonical_json(model.arch);
    binio::write_le<std::uint64_t>(os, arch.size());
    os.write(arch.data(), static_cast<std::streamsize>(arch.size()));
    write_f64_array(os, model.params);
    std::vector<double> stats;
    for (const auto& r : model.bn_stats) {
        stats.insert(stats.end(), r.mean.begin(), r.mean.end());
        stats.insert(stats.end(), r.var.begin(), r.var.end());
    }
    write_f64_array(os, stats);
    if (!os) throw Error("failed writing model");
}

ModelState read_model(std::istream& is) {
    binio::expect_magic(is, kMagic);
    const auto version = binio::read_le<std::uint32_t>(is, "format version");
    if (version != kModelFormatVersion) {
        throw FormatError("unsupported model format version " + std::to_string(version));
    }
    const auto arch_len = binio::read_le<std::uint64_t>(is, "architecture length");
    if (arch_len > (1u << 24)) throw FormatError("implausible architecture length");
    std::string arch_text(static_cast<std::size_t>(arch_len), '\0');
    if (!is.read(arch_text.data(), static_cast<std::streamsize>(arch_len))) {
        throw FormatError("truncated file while reading architecture");
    }
    ModelState model = init_model(arch_from_json_text(arch_text), 0);
    auto params = read_f64_array(is, "parameters");
    if (params.size() != model.params.size()) {
        throw FormatError("parameter count " + std::to_string(params.size()) + " does not match architecture (" +
                          std::to_string(model.params.size()) + ")");
    }
    model.params = std::move(params);
    const auto stats = read_f64_array(is, "batchnorm statistics");
    std::size_t expected = 0;
    for (const auto& r : model.bn_stats) expected += 2 * r.mean.size();
    if (stats.size() != expected) throw FormatError("batchnorm statistics do not match architecture");
    std::size_t pos = 0;
    for (auto& r : model.bn_stats) {
        for (auto& v : r.mean) v = stats[pos++];
        for (auto& v : r.var) v = stats[pos++];
    }
    return model;
}

void save_model(const ModelState& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_model(os, model);
}

ModelState load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    return read_model(is);
}

}  // namespace mulab::nn
