#include <cmath>

#include "mulab/error.hpp"
#include "mulab/nn/model.hpp"
#include "mulab/rng.hpp"

namespace mulab::nn {

std::string role_name(ParamRole role) {
    switch (role) {
        case ParamRole::Weight: return "weight";
        case ParamRole::Bias: return "bias";
        case ParamRole::Scale: return "scale";
        case ParamRole::Shift: return "shift";
    }
    return "unknown";
}

std::string loss_kind_name(LossKind kind) {
    return kind == LossKind::CrossEntropy ? "ce" : "bce";
}

std::vector<ParamRecord> build_layout(const ArchSpec& arch) {
    validate(arch);
    std::vector<ParamRecord> layout;
    std::size_t offset = 0;
    auto push = [&](std::size_t layer, ParamRole role, std::size_t length) {
        layout.push_back({layer, role, offset, length});
        offset += length;
    };
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const Layer& l = arch.layers[i];
        if (const auto* d = std::get_if<Dense>(&l)) {
            push(i, ParamRole::Weight, d->in * d->out);
            push(i, ParamRole::Bias, d->out);
        } else if (const auto* c = std::get_if<Conv2D>(&l)) {
            push(i, ParamRole::Weight, c->out_channels * c->in_channels * c->kernel * c->kernel);
            push(i, ParamRole::Bias, c->out_channels);
        } else if (const auto* b = std::get_if<BatchNorm>(&l)) {
            push(i, ParamRole::Scale, b->num_features);
            push(i, ParamRole::Shift, b->num_features);
        }
    }
    return layout;
}

const ParamRecord& ModelState::record(std::size_t layer_index, ParamRole role) const {
    for (const auto& r : layout) {
        if (r.layer_index == layer_index && r.role == role) return r;
    }
    throw ShapeError("layer " + std::to_string(layer_index) + " has no " + role_name(role) + " parameters");
}

Targets Targets::single(std::vector<std::uint32_t> classes) {
    Targets t;
    t.kind = LossKind::CrossEntropy;
    t.classes = std::move(classes);
    return t;
}

Targets Targets::multi(std::vector<std::uint8_t> bits, std::size_t num_labels) {
    if (num_labels == 0 || bits.size() % num_labels != 0) {
        throw ShapeError("multi-label target matrix is not a whole number of rows");
    }
    Targets t;
    t.kind = LossKind::BinaryCrossEntropy;
    t.bits = std::move(bits);
    t.num_labels = num_labels;
    return t;
}

std::size_t Targets::batch_size() const noexcept {
    return kind == LossKind::CrossEntropy ? classes.size() : (num_labels ? bits.size() / num_labels : 0);
}

ModelState init_model(const ArchSpec& arch, std::uint64_t seed) {
    ModelState model;
    model.arch = arch;
    model.layout = build_layout(arch);
    std::size_t total = 0;
    for (const auto& r : model.layout) total += r.length;
    model.params.assign(total, 0.0);

    Rng rng(seed);
    for (const auto& r : model.layout) {
        const Layer& l = arch.layers[r.layer_index];
        double* p = model.params.data() + r.offset;
        switch (r.role) {
            case ParamRole::Weight: {
                std::size_t fan_in = 0;
                if (const auto* d = std::get_if<Dense>(&l)) fan_in = d->in;
                if (const auto* c = std::get_if<Conv2D>(&l)) fan_in = c->in_channels * c->kernel * c->kernel;
                const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
                for (std::size_t k = 0; k < r.length; ++k) p[k] = rng.uniform(-bound, bound);
                break;
            }
            case ParamRole::Scale:
                for (std::size_t k = 0; k < r.length; ++k) p[k] = 1.0;
                break;
            case ParamRole::Bias:
            case ParamRole::Shift:
                break;
        }
    }
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        if (const auto* b = std::get_if<BatchNorm>(&arch.layers[i])) {
            model.bn_stats.push_back({i, std::vector<double>(b->num_features, 0.0),
                                      std::vector<double>(b->num_features, 1.0)});
        }
    }
    return model;
}

ModelState clone_with_params(const ModelState& model, std::vector<double> new_params) {
    if (new_params.size() != model.params.size()) {
        throw ShapeError("clone_with_params: expected " + std::to_string(model.params.size()) +
                         " parameters, got " + std::to_string(new_params.size()));
    }
    ModelState out;
    out.arch = model.arch;
    out.layout = model.layout;
    out.bn_stats = model.bn_stats;
    out.params = std::move(new_params);
    return out;
}

void apply_batch_stats(ModelState& model, const std::vector<BatchStats>& stats) {
    for (const auto& s : stats) {
        RunningStats* target = nullptr;
        for (auto& r : model.bn_stats) {
            if (r.layer_index == s.layer_index) target = &r;
        }
        if (!target || target->mean.size() != s.mean.size()) {
            throw ShapeError("batch statistics do not match the model's BatchNorm layers");
        }
        const double momentum = std::get<BatchNorm>(model.arch.layers[s.layer_index]).momentum;
        for (std::size_t c = 0; c < s.mean.size(); ++c) {
            target->mean[c] = (1.0 - momentum) * target->mean[c] + momentum * s.mean[c];
            target->var[c] = (1.0 - momentum) * target->var[c] + momentum * s.var[c];
        }
    }
}

}  // namespace mulab::nn
