#include "renn/fcn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "renn/errors.hpp"
#include "renn/rng.hpp"

namespace renn {

std::vector<LayerSpec> canonical_layer_specs(const FcnConfig& cfg) {
    const int C = cfg.hidden_channels;
    std::vector<LayerSpec> ls;
    auto add = [&](LayerKind k, int ic, int oc, int w, int tap = -1) {
        ls.push_back(LayerSpec{k, ic, oc, w, tap});
    };
    std::array<int, kPoolLevels> taps{};
    int ch = cfg.in_channels;
    for (int level = 0; level < kPoolLevels; ++level) {
        add(LayerKind::Conv, ch, C, 3);
        add(LayerKind::Relu, C, C, 0);
        add(LayerKind::Conv, C, C, 3);
        add(LayerKind::Relu, C, C, 0);
        add(LayerKind::BatchNorm, C, C, 0);
        taps[level] = static_cast<int>(ls.size()) - 1;
        add(LayerKind::MaxPool, C, C, 0);
        ch = C;
    }
    for (int level = kPoolLevels - 1; level >= 0; --level) {
        add(LayerKind::Deconv, C, C, 2);
        add(LayerKind::Concat, C, 2 * C, 0, taps[level]);
        if (level >= 2) {
            add(LayerKind::Conv, 2 * C, C, 3);
            add(LayerKind::Relu, C, C, 0);
            add(LayerKind::BatchNorm, C, C, 0);
        } else if (level == 1) {
            add(LayerKind::Conv, 2 * C, C, 3);
            add(LayerKind::Relu, C, C, 0);
        } else {
            add(LayerKind::Conv, 2 * C, kOutChannels, 1);
            add(LayerKind::Softmax, kOutChannels, kOutChannels, 0);
        }
    }
    return ls;
}

Model build_fcn(const FcnConfig& cfg) {
    if (cfg.in_channels < 1) throw ConfigError("build_fcn: in_channels must be >= 1");
    if (cfg.hidden_channels < 1) throw ConfigError("build_fcn: hidden_channels must be >= 1");
    Model m;
    m.config = cfg;
    m.layers = canonical_layer_specs(cfg);
    m.params.resize(m.layers.size());
    Rng rng(cfg.seed);
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const LayerSpec& L = m.layers[i];
        LayerParams& p = m.params[i];
        if (L.kind == LayerKind::Conv || L.kind == LayerKind::Deconv) {
            p.in_ch = L.in_ch;
            p.out_ch = L.out_ch;
            p.width = L.width;
            p.kernel.resize(static_cast<std::size_t>(L.out_ch) * L.in_ch * L.width);
            const double a = 1.0 / std::sqrt(static_cast<double>(L.in_ch) * L.width);
            for (double& w : p.kernel) w = rng.uniform(-a, a);
            p.bias.assign(L.out_ch, 0.0);
        } else if (L.kind == LayerKind::BatchNorm) {
            p.out_ch = L.out_ch;
            p.gamma.assign(L.out_ch, 1.0);
            p.beta.assign(L.out_ch, 0.0);
            p.run_mean.assign(L.out_ch, 0.0);
            p.run_var.assign(L.out_ch, 1.0);
        }
    }
    return m;
}

LayerCensus census(const Model& m) {
    LayerCensus c;
    for (const LayerSpec& L : m.layers) {
        switch (L.kind) {
            case LayerKind::Conv: ++c.conv; break;
            case LayerKind::BatchNorm: ++c.batchnorm; break;
            case LayerKind::MaxPool: ++c.maxpool; break;
            case LayerKind::Deconv: ++c.deconv; break;
            case LayerKind::Concat: ++c.concat; break;
            default: break;
        }
    }
    return c;
}

long trainable_parameter_count(const Model& m) {
    long n = 0;
    for (const LayerParams& p : m.params)
        n += static_cast<long>(p.kernel.size() + p.bias.size() + p.gamma.size() + p.beta.size());
    return n;
}

Series model_forward(const Model& m, const Series& x, ForwardCache* cache) {
    if (x.channels != m.config.in_channels)
        throw ConfigError("model_forward: input has " + std::to_string(x.channels) + " channels, expected " +
                          std::to_string(m.config.in_channels));
    if (x.length <= 0 || x.length % kLengthMultiple != 0)
        throw UsageError("model_forward: length must be a positive multiple of " +
                         std::to_string(kLengthMultiple) + "; pad with pad_to_pool");
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    const std::size_t n = m.layers.size();
    c.input = x;
    c.out.assign(n, Series{});
    c.pool_argmax.assign(n, {});
    c.bn.assign(n, BnCache{});
    const Series* cur = &c.input;
    for (std::size_t i = 0; i < n; ++i) {
        const LayerSpec& L = m.layers[i];
        switch (L.kind) {
            case LayerKind::Conv: c.out[i] = conv1d_forward(*cur, m.params[i]); break;
            case LayerKind::Relu: c.out[i] = relu_forward(*cur); break;
            case LayerKind::BatchNorm:
                c.out[i] = batchnorm_forward(*cur, m.params[i], m.training, m.training ? &c.bn[i] : nullptr);
                break;
            case LayerKind::MaxPool: c.out[i] = maxpool2_forward(*cur, c.pool_argmax[i]); break;
            case LayerKind::Deconv: c.out[i] = deconv2_forward(*cur, m.params[i]); break;
            case LayerKind::Concat: c.out[i] = concat_channels(*cur, c.out[L.concat_tap]); break;
            case LayerKind::Softmax: c.out[i] = softmax_channels(*cur); break;
        }
        cur = &c.out[i];
    }
    return c.out[n - 1];
}

void update_running_stats(Model& m, const ForwardCache& cache) {
    if (!m.training) throw UsageError("update_running_stats: model not in training mode");
    if (cache.bn.size() != m.layers.size()) throw UsageError("update_running_stats: cache mismatch");
    for (std::size_t i = 0; i < m.layers.size(); ++i)
        if (m.layers[i].kind == LayerKind::BatchNorm) batchnorm_update_running(m.params[i], cache.bn[i]);
}

static void accumulate(Series& dst, const Series& src) {
    if (dst.v.empty()) {
        dst = src;
        return;
    }
    for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

double model_backward(const Model& m, const ForwardCache& cache, const std::vector<std::uint8_t>& labels,
                      double w_pos, int valid_len, ModelGrads& grads) {
    if (!m.training) throw UsageError("model_backward: model not in training mode");
    const std::size_t n = m.layers.size();
    if (cache.out.size() != n || cache.out.empty() || cache.out.back().v.empty())
        throw UsageError("model_backward: missing forward cache");
    if (m.layers.back().kind != LayerKind::Softmax) throw UsageError("model_backward: expected softmax head");
    grads.layers.assign(n, ParamGrads{});
    std::vector<Series> gout(n);

    const double loss = weighted_cross_entropy(cache.out[n - 1], labels, w_pos, valid_len);
    // Softmax and cross entropy differentiate as one piece, straight to logits.
    gout[n - 2] = softmax_xent_backward(cache.out[n - 1], labels, w_pos, valid_len);

    for (int i = static_cast<int>(n) - 2; i >= 0; --i) {
        const LayerSpec& L = m.layers[i];
        const Series& input = (i == 0) ? cache.input : cache.out[i - 1];
        const Series& go = gout[i];
        Series gin;
        switch (L.kind) {
            case LayerKind::Conv: gin = conv1d_backward(input, m.params[i], go, grads.layers[i]); break;
            case LayerKind::Relu: gin = relu_backward(input, go); break;
            case LayerKind::BatchNorm:
                gin = batchnorm_backward(input, m.params[i], cache.bn[i], go, grads.layers[i]);
                break;
            case LayerKind::MaxPool:
                gin = maxpool2_backward(cache.pool_argmax[i], L.out_ch, input.length, go);
                break;
            case LayerKind::Deconv: gin = deconv2_backward(input, m.params[i], go, grads.layers[i]); break;
            case LayerKind::Concat: {
                // First block of channels came down the main path, the rest from the tap.
                gin = Series(input.channels, input.length);
                std::copy(go.v.begin(), go.v.begin() + gin.v.size(), gin.v.begin());
                Series tap(L.out_ch - input.channels, input.length);
                std::copy(go.v.begin() + gin.v.size(), go.v.end(), tap.v.begin());
                accumulate(gout[L.concat_tap], tap);
                break;
            }
            case LayerKind::Softmax: throw UsageError("model_backward: unexpected softmax");
        }
        if (i > 0) accumulate(gout[i - 1], gin);
    }
    return loss;
}

std::pair<Series, int> pad_to_pool(const Series& x) {
    if (x.length < 1) throw UsageError("pad_to_pool: empty series");
    const int L = x.length;
    const int Lp = ((L + kLengthMultiple - 1) / kLengthMultiple) * kLengthMultiple;
    if (L == Lp) return {x, L};
    Series out(x.channels, Lp);
    for (int c = 0; c < x.channels; ++c) {
        const double* xi = x.row(c);
        double* o = out.row(c);
        std::copy(xi, xi + L, o);
        // mirror about the last sample; clamped for very short inputs
        for (int j = 0; j < Lp - L; ++j) o[L + j] = xi[std::max(0, L - 2 - j)];
    }
    return {out, L};
}

Series trim_to(const Series& x, int length) {
    if (length > x.length || length < 1) throw UsageError("trim_to: bad target length");
    if (length == x.length) return x;
    Series out(x.channels, length);
    for (int c = 0; c < x.channels; ++c) {
        const double* xi = x.row(c);
        std::copy(xi, xi + length, out.row(c));
    }
    return out;
}

long receptive_field(const std::vector<LayerSpec>& layers) {
    long r = 1, j = 1;
    for (const LayerSpec& L : layers) {
        long k = 1, s = 1;
        switch (L.kind) {
            case LayerKind::Conv: k = L.width; break;
            case LayerKind::MaxPool: k = 2, s = 2; break;
            case LayerKind::Relu:
            case LayerKind::BatchNorm:
            case LayerKind::Softmax: break;
            default: throw UsageError("receptive_field: defined for the downsampling path only");
        }
        r += (k - 1) * j;
        j *= s;
    }
    return r;
}

long encoder_receptive_field(const FcnConfig& cfg) {
    std::vector<LayerSpec> all = canonical_layer_specs(cfg);
    std::vector<LayerSpec> enc;
    int pools = 0;
    for (const LayerSpec& L : all) {
        enc.push_back(L);
        if (L.kind == LayerKind::MaxPool && ++pools == kPoolLevels) break;
    }
    return receptive_field(enc);
}

std::vector<std::vector<double>*> trainable_grids(Model& m) {
    std::vector<std::vector<double>*> g;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        switch (m.layers[i].kind) {
            case LayerKind::Conv:
            case LayerKind::Deconv:
                g.push_back(&m.params[i].kernel);
                g.push_back(&m.params[i].bias);
                break;
            case LayerKind::BatchNorm:
                g.push_back(&m.params[i].gamma);
                g.push_back(&m.params[i].beta);
                break;
            default: break;
        }
    }
    return g;
}

std::vector<const std::vector<double>*> trainable_grids(const Model& m) {
    auto mutable_grids = trainable_grids(const_cast<Model&>(m));
    return {mutable_grids.begin(), mutable_grids.end()};
}

std::vector<std::vector<double>*> grad_grids(ModelGrads& g, const Model& m) {
    if (g.layers.size() != m.layers.size()) throw UsageError("grad_grids: gradient/model mismatch");
    std::vector<std::vector<double>*> out;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        switch (m.layers[i].kind) {
            case LayerKind::Conv:
            case LayerKind::Deconv:
                out.push_back(&g.layers[i].kernel);
                out.push_back(&g.layers[i].bias);
                break;
            case LayerKind::BatchNorm:
                out.push_back(&g.layers[i].gamma);
                out.push_back(&g.layers[i].beta);
                break;
            default: break;
        }
    }
    return out;
}

void adam_step_model(Model& m, ModelGrads& grads, ModelAdam& state, double lr) {
    auto params = trainable_grids(m);
    auto gs = grad_grids(grads, m);
    if (state.slots.size() != params.size()) state.slots.resize(params.size());
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i)
        adam_update(*params[i], *gs[i], state.slots[i], state.step, lr);
}

}  // namespace renn
