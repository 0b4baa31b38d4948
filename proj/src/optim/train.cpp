#include <numeric>

#include "mulab/error.hpp"
#include "mulab/optim/optim.hpp"
#include "mulab/rng.hpp"

namespace mulab::optim {

nn::LossKind loss_kind_for(const data::TaskKind& task) {
    return task.is_single() ? nn::LossKind::CrossEntropy : nn::LossKind::BinaryCrossEntropy;
}

std::pair<Tensor, nn::Targets> make_batch(const data::LabeledDataset& ds, std::span<const std::size_t> indices) {
    if (indices.empty()) throw DataError("empty batch");
    const std::size_t fs = ds.feature_size();
    std::vector<std::size_t> shape{indices.size()};
    shape.insert(shape.end(), ds.feature_shape.begin(), ds.feature_shape.end());
    std::vector<double> values(indices.size() * fs);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto& f = ds.samples[indices[r]].features;
        for (std::size_t k = 0; k < fs; ++k) values[r * fs + k] = static_cast<double>(f[k]);
    }
    Tensor batch(std::move(shape), std::move(values));

    if (ds.task.is_single()) {
        std::vector<std::uint32_t> classes;
        classes.reserve(indices.size());
        for (auto i : indices) classes.push_back(ds.samples[i].class_index);
        return {std::move(batch), nn::Targets::single(std::move(classes))};
    }
    std::vector<std::uint8_t> bits;
    bits.reserve(indices.size() * ds.task.count);
    for (auto i : indices) {
        for (auto b : ds.samples[i].labels) {
            if (b == data::LabelBit::Unknown) throw DataError("Unknown label in a training batch; apply U-one first");
            bits.push_back(b == data::LabelBit::Positive ? 1 : 0);
        }
    }
    return {std::move(batch), nn::Targets::multi(std::move(bits), ds.task.count)};
}

TrainResult train(nn::ModelState model, const data::LabeledDataset& data, const TrainConfig& cfg) {
    TrainResult result;
    if (cfg.epochs == 0) {
        result.model = std::move(model);
        return result;
    }
    if (data.empty()) throw DataError("cannot train on an empty dataset");
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (loss_kind_for(data.task) != cfg.loss_kind) {
        throw DataError("loss " + nn::loss_kind_name(cfg.loss_kind) + " is incompatible with the dataset's labels");
    }
    if (model.arch.output_dim != data.task.count) {
        throw ShapeError("model output_dim does not match the dataset's class/label count");
    }
    if (!cfg.mask.empty() && cfg.mask.size() != model.params.size()) {
        throw ShapeError("training mask length differs from the parameter count");
    }

    const std::size_t n = data.size();
    const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    const LrSchedule schedule{cfg.lr0, cfg.eta_min_factor * cfg.lr0, cfg.epochs * batches};
    AdamState adam = AdamState::fresh(model.params.size());
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);

    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * cfg.batch_size;
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + begin, end - begin);
            auto [batch, targets] = make_batch(data, idx);
            auto lg = nn::loss_and_grad(model, batch, targets, cfg.loss_kind, nn::Mode::Train);
            adam_step(model.params, lg.grad, adam, cosine_lr(schedule, step), cfg.mask);
            nn::apply_batch_stats(model, lg.batch_stats);
            loss_sum += lg.loss * static_cast<double>(idx.size());
            ++step;
        }
        result.epoch_losses.push_back(loss_sum / static_cast<double>(n));
    }
    result.model = std::move(model);
    return result;
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
    j = nlohmann::json{{"epochs", cfg.epochs},
                       {"batch_size", cfg.batch_size},
                       {"lr0", cfg.lr0},
                       {"eta_min_factor", cfg.eta_min_factor}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
    try {
        TrainConfig d;
        d.epochs = j.value("epochs", d.epochs);
        d.batch_size = j.value("batch_size", d.batch_size);
        d.lr0 = j.value("lr0", d.lr0);
        d.eta_min_factor = j.value("eta_min_factor", d.eta_min_factor);
        if (d.batch_size == 0) throw ConfigError("train.batch_size must be positive");
        if (!(d.lr0 > 0.0)) throw ConfigError("train.lr0 must be positive");
        if (!(d.eta_min_factor >= 0.0 && d.eta_min_factor <= 1.0)) throw ConfigError("train.eta_min_factor must lie in [0, 1]");
        cfg = std::move(d);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed train config: ") + e.what());
    }
}

}  // namespace mulab::optim
