// Layer-by-layer forward and backward passes over a ModelState.

#include <algorithm>
#include <cmath>
#include <optional>

#include "mulab/error.hpp"
#include "mulab/nn/model.hpp"
#include "mulab/simd/kernels.hpp"

namespace mulab::nn {

namespace {

struct BatchNormCache {
    std::vector<double> xhat;     // normalized input, same layout as the input
    std::vector<double> inv_std;  // per channel
};

struct LayerCache {
    Tensor input;
    std::optional<BatchNormCache> bn;
};

struct Pass {
    Tensor logits;
    std::vector<LayerCache> caches;  // filled only when a backward pass follows
    std::vector<BatchStats> batch_stats;
};

const double* param_ptr(const ModelState& m, std::size_t layer, ParamRole role) {
    return m.params.data() + m.record(layer, role).offset;
}

const RunningStats& running_stats(const ModelState& m, std::size_t layer) {
    for (const auto& r : m.bn_stats) {
        if (r.layer_index == layer) return r;
    }
    throw ShapeError("missing running statistics for BatchNorm layer " + std::to_string(layer));
}

void check_finite(const Tensor& t, std::size_t layer, const ArchSpec& arch) {
    if (!t.all_finite()) {
        throw NumericError("non-finite activation after layer " + std::to_string(layer) + " (" +
                           layer_name(arch.layers[layer]) + ")");
    }
}

// (channels, spatial) view of a per-sample shape {C,H,W} or {D}.
std::pair<std::size_t, std::size_t> channel_view(const Tensor& x) {
    if (x.rank() == 4) return {x.dim(1), x.dim(2) * x.dim(3)};
    return {x.dim(1), 1};
}

// ---- Dense ----

Tensor dense_forward(const Dense& d, const double* w, const double* b, const Tensor& x) {
    const std::size_t n = x.dim(0);
    Tensor y({n, d.out});
    for (std::size_t s = 0; s < n; ++s) {
        const double* xs = x.data() + s * d.in;
        double* ys = y.data() + s * d.out;
        for (std::size_t j = 0; j < d.out; ++j) ys[j] = b[j] + simd::dot(w + j * d.in, xs, d.in);
    }
    return y;
}

Tensor dense_backward(const Dense& d, const double* w, const Tensor& x, const Tensor& dy, double* dw, double* db) {
    const std::size_t n = x.dim(0);
    Tensor dx(x.shape());
    for (std::size_t s = 0; s < n; ++s) {
        const double* xs = x.data() + s * d.in;
        const double* gs = dy.data() + s * d.out;
        double* dxs = dx.data() + s * d.in;
        for (std::size_t j = 0; j < d.out; ++j) {
            const double g = gs[j];
            if (g == 0.0) continue;
            simd::axpy(g, xs, dw + j * d.in, d.in);
            db[j] += g;
            simd::axpy(g, w + j * d.in, dxs, d.in);
        }
    }
    return dx;
}

// ---- Conv2D (direct, valid padding) ----

struct ConvGeometry {
    std::size_t c, h, w, oh, ow, k, stride, patch;
};

ConvGeometry conv_geometry(const Conv2D& cv, const Tensor& x) {
    const std::size_t h = x.dim(2), w = x.dim(3);
    return {cv.in_channels, h, w, (h - cv.kernel) / cv.stride + 1, (w - cv.kernel) / cv.stride + 1,
            cv.kernel, cv.stride, cv.in_channels * cv.kernel * cv.kernel};
}

void gather_patch(const ConvGeometry& g, const double* img, std::size_t oy, std::size_t ox, double* patch) {
    std::size_t p = 0;
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t i = 0; i < g.k; ++i) {
            const double* row = img + (c * g.h + oy * g.stride + i) * g.w + ox * g.stride;
            for (std::size_t j = 0; j < g.k; ++j) patch[p++] = row[j];
        }
    }
}

void scatter_patch(const ConvGeometry& g, const double* patch, std::size_t oy, std::size_t ox, double* img) {
    std::size_t p = 0;
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t i = 0; i < g.k; ++i) {
            double* row = img + (c * g.h + oy * g.stride + i) * g.w + ox * g.stride;
            for (std::size_t j = 0; j < g.k; ++j) row[j] += patch[p++];
        }
    }
}

Tensor conv_forward(const Conv2D& cv, const double* w, const double* b, const Tensor& x) {
    const auto g = conv_geometry(cv, x);
    const std::size_t n = x.dim(0);
    Tensor y({n, cv.out_channels, g.oh, g.ow});
    std::vector<double> patch(g.patch);
    const std::size_t in_stride = g.c * g.h * g.w;
    const std::size_t plane = g.oh * g.ow;
    for (std::size_t s = 0; s < n; ++s) {
        const double* img = x.data() + s * in_stride;
        double* out = y.data() + s * cv.out_channels * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                gather_patch(g, img, oy, ox, patch.data());
                for (std::size_t o = 0; o < cv.out_channels; ++o) {
                    out[o * plane + oy * g.ow + ox] = b[o] + simd::dot(w + o * g.patch, patch.data(), g.patch);
                }
            }
        }
    }
    return y;
}

Tensor conv_backward(const Conv2D& cv, const double* w, const Tensor& x, const Tensor& dy, double* dw,
                     double* db) {
    const auto g = conv_geometry(cv, x);
    const std::size_t n = x.dim(0);
    Tensor dx(x.shape());
    std::vector<double> patch(g.patch), dpatch(g.patch);
    const std::size_t in_stride = g.c * g.h * g.w;
    const std::size_t plane = g.oh * g.ow;
    for (std::size_t s = 0; s < n; ++s) {
        const double* img = x.data() + s * in_stride;
        double* dimg = dx.data() + s * in_stride;
        const double* grad = dy.data() + s * cv.out_channels * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                gather_patch(g, img, oy, ox, patch.data());
                std::fill(dpatch.begin(), dpatch.end(), 0.0);
                for (std::size_t o = 0; o < cv.out_channels; ++o) {
                    const double go = grad[o * plane + oy * g.ow + ox];
                    if (go == 0.0) continue;
                    db[o] += go;
                    simd::axpy(go, patch.data(), dw + o * g.patch, g.patch);
                    simd::axpy(go, w + o * g.patch, dpatch.data(), g.patch);
                }
                scatter_patch(g, dpatch.data(), oy, ox, dimg);
            }
        }
    }
    return dx;
}

// ---- BatchNorm ----

Tensor batchnorm_forward(const BatchNorm& bn, const double* gamma, const double* beta, const Tensor& x, Mode mode,
                         const RunningStats& running, std::size_t layer, LayerCache* cache,
                         std::vector<BatchStats>* stats_out) {
    const auto [channels, spatial] = channel_view(x);
    const std::size_t n = x.dim(0);
    const std::size_t count = n * spatial;
    Tensor y(x.shape());
    BatchNormCache bc;
    bc.xhat.resize(x.size());
    bc.inv_std.resize(channels);
    BatchStats stats{layer, std::vector<double>(channels), std::vector<double>(channels)};

    for (std::size_t c = 0; c < channels; ++c) {
        double mean, var;
        if (mode == Mode::Train) {
            double sum = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const double* px = x.data() + (s * channels + c) * spatial;
                for (std::size_t k = 0; k < spatial; ++k) sum += px[k];
            }
            mean = sum / static_cast<double>(count);
            double sq = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const double* px = x.data() + (s * channels + c) * spatial;
                for (std::size_t k = 0; k < spatial; ++k) sq += (px[k] - mean) * (px[k] - mean);
            }
            var = sq / static_cast<double>(count);
            stats.mean[c] = mean;
            stats.var[c] = count > 1 ? sq / static_cast<double>(count - 1) : var;
        } else {
            mean = running.mean[c];
            var = running.var[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + bn.epsilon);
        bc.inv_std[c] = inv_std;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * channels + c) * spatial;
            for (std::size_t k = 0; k < spatial; ++k) {
                const double xh = (x[base + k] - mean) * inv_std;
                bc.xhat[base + k] = xh;
                y[base + k] = gamma[c] * xh + beta[c];
            }
        }
    }
    if (mode == Mode::Train && stats_out) stats_out->push_back(std::move(stats));
    if (cache) cache->bn = std::move(bc);
    return y;
}

Tensor batchnorm_backward(const double* gamma, const Tensor& x, const Tensor& dy, const BatchNormCache& bc,
                          Mode mode, double* dgamma, double* dbeta) {
    const auto [channels, spatial] = channel_view(x);
    const std::size_t n = x.dim(0);
    const double m = static_cast<double>(n * spatial);
    Tensor dx(x.shape());
    for (std::size_t c = 0; c < channels; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * channels + c) * spatial;
            for (std::size_t k = 0; k < spatial; ++k) {
                sum_dy += dy[base + k];
                sum_dy_xhat += dy[base + k] * bc.xhat[base + k];
            }
        }
        dgamma[c] += sum_dy_xhat;
        dbeta[c] += sum_dy;
        const double scale = gamma[c] * bc.inv_std[c];
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * channels + c) * spatial;
            for (std::size_t k = 0; k < spatial; ++k) {
                if (mode == Mode::Train) {
                    dx[base + k] = scale * (dy[base + k] - sum_dy / m - bc.xhat[base + k] * sum_dy_xhat / m);
                } else {
                    dx[base + k] = scale * dy[base + k];
                }
            }
        }
    }
    return dx;
}

// ---- pooling, flatten, relu ----

Tensor gap_forward(const Tensor& x) {
    const std::size_t n = x.dim(0), c = x.dim(1), spatial = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < spatial; ++k) sum += x[i * spatial + k];
        y[i] = sum / static_cast<double>(spatial);
    }
    return y;
}

Tensor gap_backward(const Tensor& x, const Tensor& dy) {
    const std::size_t spatial = x.dim(2) * x.dim(3);
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        const double g = dy[i] / static_cast<double>(spatial);
        for (std::size_t k = 0; k < spatial; ++k) dx[i * spatial + k] = g;
    }
    return dx;
}

Pass run_forward(const ModelState& model, const Tensor& batch, Mode mode, bool keep_caches) {
    const auto& arch = model.arch;
    std::vector<std::size_t> expected{0};
    expected.insert(expected.end(), arch.input_shape.begin(), arch.input_shape.end());
    if (batch.rank() != expected.size() ||
        !std::equal(expected.begin() + 1, expected.end(), batch.shape().begin() + 1)) {
        throw ShapeError("batch shape " + shape_to_string(batch.shape()) + " does not match input shape " +
                         shape_to_string(arch.input_shape));
    }
    if (model.params.size() != (model.layout.empty() ? 0 : model.layout.back().offset + model.layout.back().length)) {
        throw ShapeError("model parameter vector does not match its layout");
    }

    Pass pass;
    if (keep_caches) pass.caches.resize(arch.layers.size());
    Tensor x = batch;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const Layer& layer = arch.layers[i];
        LayerCache* cache = keep_caches ? &pass.caches[i] : nullptr;
        if (cache) cache->input = x;
        Tensor y;
        if (const auto* d = std::get_if<Dense>(&layer)) {
            y = dense_forward(*d, param_ptr(model, i, ParamRole::Weight), param_ptr(model, i, ParamRole::Bias), x);
        } else if (const auto* c = std::get_if<Conv2D>(&layer)) {
            y = conv_forward(*c, param_ptr(model, i, ParamRole::Weight), param_ptr(model, i, ParamRole::Bias), x);
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            y = batchnorm_forward(*bn, param_ptr(model, i, ParamRole::Scale), param_ptr(model, i, ParamRole::Shift),
                                  x, mode, running_stats(model, i), i, cache, &pass.batch_stats);
        } else if (std::holds_alternative<ReLU>(layer)) {
            y = std::move(x);
            for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
        } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
            y = gap_forward(x);
        } else {
            y = std::move(x);
            const std::size_t n = y.dim(0);
            y.reshape({n, y.size() / n});
        }
        check_finite(y, i, arch);
        x = std::move(y);
    }
    pass.logits = std::move(x);
    return pass;
}

// Mean loss and d(loss)/d(logits).
double loss_and_dlogits(const Tensor& logits, const Targets& t, LossKind kind, Tensor* dlogits) {
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (t.kind != kind) throw DataError("targets do not match loss kind " + loss_kind_name(kind));
    if (t.batch_size() != n) throw ShapeError("targets cover a different number of samples than the batch");
    if (dlogits) *dlogits = Tensor(logits.shape());
    double total = 0.0;
    if (kind == LossKind::CrossEntropy) {
        if (k < 2) throw ShapeError("cross-entropy needs at least 2 outputs");
        for (std::size_t s = 0; s < n; ++s) {
            const std::uint32_t y = t.classes[s];
            if (y >= k) throw DataError("label " + std::to_string(y) + " out of range for " + std::to_string(k) + " classes");
            const double* z = logits.data() + s * k;
            const double zmax = *std::max_element(z, z + k);
            double denom = 0.0;
            for (std::size_t j = 0; j < k; ++j) denom += std::exp(z[j] - zmax);
            const double log_denom = std::log(denom);
            total += -(z[y] - zmax - log_denom);
            if (dlogits) {
                double* g = dlogits->data() + s * k;
                for (std::size_t j = 0; j < k; ++j) {
                    const double p = std::exp(z[j] - zmax - log_denom);
                    g[j] = (p - (j == y ? 1.0 : 0.0)) / static_cast<double>(n);
                }
            }
        }
        total /= static_cast<double>(n);
    } else {
        if (t.num_labels != k) throw ShapeError("multi-label targets have a different label count than the output");
        const double denom = static_cast<double>(n * k);
        for (std::size_t i = 0; i < n * k; ++i) {
            const double z = logits[i];
            const double y = t.bits[i] ? 1.0 : 0.0;
            if (t.bits[i] > 1) throw DataError("multi-label target entries must be 0 or 1");
            total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
            if (dlogits) {
                const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                (*dlogits)[i] = (sig - y) / denom;
            }
        }
        total /= denom;
    }
    if (!std::isfinite(total)) throw NumericError("non-finite loss");
    return total;
}

}  // namespace

Tensor forward(const ModelState& model, const Tensor& batch, Mode mode) {
    return run_forward(model, batch, mode, false).logits;
}

double loss_value(const ModelState& model, const Tensor& batch, const Targets& targets, LossKind kind, Mode mode) {
    const Tensor logits = forward(model, batch, mode);
    return loss_and_dlogits(logits, targets, kind, nullptr);
}

LossAndGrad loss_and_grad(const ModelState& model, const Tensor& batch, const Targets& targets, LossKind kind,
                          Mode mode) {
    if (batch.rank() == 0 || batch.dim(0) == 0) throw DataError("empty batch");
    Pass pass = run_forward(model, batch, mode, true);
    LossAndGrad out;
    Tensor grad_out;
    out.loss = loss_and_dlogits(pass.logits, targets, kind, &grad_out);
    out.grad.values.assign(model.params.size(), 0.0);
    double* g = out.grad.values.data();

    const auto& arch = model.arch;
    for (std::size_t li = arch.layers.size(); li-- > 0;) {
        const Layer& layer = arch.layers[li];
        const LayerCache& cache = pass.caches[li];
        const Tensor& x = cache.input;
        Tensor dx;
        if (const auto* d = std::get_if<Dense>(&layer)) {
            const auto& rw = model.record(li, ParamRole::Weight);
            const auto& rb = model.record(li, ParamRole::Bias);
            dx = dense_backward(*d, model.params.data() + rw.offset, x, grad_out, g + rw.offset, g + rb.offset);
        } else if (const auto* c = std::get_if<Conv2D>(&layer)) {
            const auto& rw = model.record(li, ParamRole::Weight);
            const auto& rb = model.record(li, ParamRole::Bias);
            dx = conv_backward(*c, model.params.data() + rw.offset, x, grad_out, g + rw.offset, g + rb.offset);
        } else if (std::holds_alternative<BatchNorm>(layer)) {
            const auto& rs = model.record(li, ParamRole::Scale);
            const auto& rh = model.record(li, ParamRole::Shift);
            dx = batchnorm_backward(model.params.data() + rs.offset, x, grad_out, *cache.bn, mode, g + rs.offset,
                                    g + rh.offset);
        } else if (std::holds_alternative<ReLU>(layer)) {
            dx = std::move(grad_out);
            for (std::size_t i = 0; i < dx.size(); ++i) {
                if (!(x[i] > 0.0)) dx[i] = 0.0;
            }
        } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
            dx = gap_backward(x, grad_out);
        } else {
            dx = std::move(grad_out);
            dx.reshape(x.shape());
        }
        grad_out = std::move(dx);
    }
    for (double v : out.grad.values) {
        if (!std::isfinite(v)) throw NumericError("non-finite gradient");
    }
    out.batch_stats = std::move(pass.batch_stats);
    return out;
}

}  // namespace mulab::nn
