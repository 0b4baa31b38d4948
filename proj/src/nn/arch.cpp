#include "mulab/nn/arch.hpp"

#include "json.hpp"

#include "mulab/error.hpp"
#include "mulab/tensor.hpp"

namespace mulab::nn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string at_layer(std::size_t i, const Layer& l) {
    return "layer " + std::to_string(i) + " (" + layer_name(l) + ")";
}

}  // namespace

std::string layer_name(const Layer& layer) {
    return std::visit(overloaded{
                          [](const Dense&) { return std::string("dense"); },
                          [](const Conv2D&) { return std::string("conv2d"); },
                          [](const ReLU&) { return std::string("relu"); },
                          [](const BatchNorm&) { return std::string("batchnorm"); },
                          [](const GlobalAvgPool&) { return std::string("global_avg_pool"); },
                          [](const Flatten&) { return std::string("flatten"); },
                      },
                      layer);
}

std::vector<std::vector<std::size_t>> infer_shapes(const ArchSpec& arch) {
    if (arch.input_shape.size() != 1 && arch.input_shape.size() != 3) {
        throw ShapeError("input shape must be {D} or {C, H, W}, got " + shape_to_string(arch.input_shape));
    }
    for (auto d : arch.input_shape) {
        if (d == 0) throw ShapeError("input shape has a zero dimension");
    }
    std::vector<std::vector<std::size_t>> shapes{arch.input_shape};
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const auto& in = shapes.back();
        const Layer& layer = arch.layers[i];
        auto fail = [&](const std::string& why) {
            throw ShapeError(at_layer(i, layer) + ": " + why + "; input shape " + shape_to_string(in));
        };
        std::vector<std::size_t> out = std::visit(
            overloaded{
                [&](const Dense& d) -> std::vector<std::size_t> {
                    if (d.in == 0 || d.out == 0) fail("dimensions must be positive");
                    if (in.size() != 1 || in[0] != d.in) fail("expects {" + std::to_string(d.in) + "}");
                    return {d.out};
                },
                [&](const Conv2D& c) -> std::vector<std::size_t> {
                    if (c.in_channels == 0 || c.out_channels == 0 || c.kernel == 0 || c.stride == 0) {
                        fail("channels, kernel and stride must be positive");
                    }
                    if (in.size() != 3 || in[0] != c.in_channels) {
                        fail("expects " + std::to_string(c.in_channels) + " input channels");
                    }
                    if (in[1] < c.kernel || in[2] < c.kernel) fail("kernel larger than input");
                    return {c.out_channels, (in[1] - c.kernel) / c.stride + 1, (in[2] - c.kernel) / c.stride + 1};
                },
                [&](const ReLU&) { return in; },
                [&](const BatchNorm& b) -> std::vector<std::size_t> {
                    if (b.num_features == 0 || in[0] != b.num_features) {
                        fail("expects " + std::to_string(b.num_features) + " features/channels");
                    }
                    if (!(b.momentum >= 0.0 && b.momentum <= 1.0)) fail("momentum must lie in [0, 1]");
                    if (!(b.epsilon > 0.0)) fail("epsilon must be positive");
                    return in;
                },
                [&](const GlobalAvgPool&) -> std::vector<std::size_t> {
                    if (in.size() != 3) fail("expects a {C, H, W} input");
                    return {in[0]};
                },
                [&](const Flatten&) -> std::vector<std::size_t> { return {shape_product(in)}; },
            },
            layer);
        shapes.push_back(std::move(out));
    }
    const auto& last = shapes.back();
    if (arch.output_dim == 0) throw ShapeError("output_dim must be at least 1");
    if (last.size() != 1 || last[0] != arch.output_dim) {
        throw ShapeError("network output shape " + shape_to_string(last) + " does not match output_dim " +
                         std::to_string(arch.output_dim));
    }
    return shapes;
}

void validate(const ArchSpec& arch) { (void)infer_shapes(arch); }

void to_json(nlohmann::json& j, const ArchSpec& arch) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : arch.layers) {
        nlohmann::json l = std::visit(
            overloaded{
                [](const Dense& d) { return nlohmann::json{{"in", d.in}, {"out", d.out}}; },
                [](const Conv2D& c) {
                    return nlohmann::json{{"in_channels", c.in_channels},
                                          {"out_channels", c.out_channels},
                                          {"kernel", c.kernel},
                                          {"stride", c.stride}};
                },
                [](const ReLU&) { return nlohmann::json::object(); },
                [](const BatchNorm& b) {
                    return nlohmann::json{
                        {"num_features", b.num_features}, {"momentum", b.momentum}, {"epsilon", b.epsilon}};
                },
                [](const GlobalAvgPool&) { return nlohmann::json::object(); },
                [](const Flatten&) { return nlohmann::json::object(); },
            },
            layer);
        l["type"] = layer_name(layer);
        layers.push_back(std::move(l));
    }
    j = nlohmann::json{{"input_shape", arch.input_shape}, {"layers", layers}, {"output_dim", arch.output_dim}};
}

void from_json(const nlohmann::json& j, ArchSpec& arch) {
    try {
        arch.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
        arch.output_dim = j.at("output_dim").get<std::size_t>();
        arch.layers.clear();
        for (const auto& l : j.at("layers")) {
            const auto type = l.at("type").get<std::string>();
            if (type == "dense") {
                arch.layers.emplace_back(Dense{l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>()});
            } else if (type == "conv2d") {
                arch.layers.emplace_back(Conv2D{l.at("in_channels").get<std::size_t>(),
                                                l.at("out_channels").get<std::size_t>(),
                                                l.at("kernel").get<std::size_t>(),
                                                l.value("stride", std::size_t{1})});
            } else if (type == "relu") {
                arch.layers.emplace_back(ReLU{});
            } else if (type == "batchnorm") {
                arch.layers.emplace_back(BatchNorm{l.at("num_features").get<std::size_t>(),
                                                   l.value("momentum", 0.1), l.value("epsilon", 1e-5)});
            } else if (type == "global_avg_pool") {
                arch.layers.emplace_back(GlobalAvgPool{});
            } else if (type == "flatten") {
                arch.layers.emplace_back(Flatten{});
            } else {
                throw ConfigError("unknown layer type \"" + type + "\"");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed architecture: ") + e.what());
    }
}

std::string canonical_json(const ArchSpec& arch) {
    nlohmann::json j = arch;
    return j.dump();
}

ArchSpec arch_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("architecture JSON does not parse: ") + e.what());
    }
    return j.get<ArchSpec>();
}

}  // namespace mulab::nn
