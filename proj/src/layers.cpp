#include "renn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "renn/errors.hpp"

namespace renn {

static void require_channels(const Series& x, int expected, const char* who) {
    if (x.channels != expected)
        throw ConfigError(std::string(who) + ": input has " + std::to_string(x.channels) +
                          " channels, expected " + std::to_string(expected));
}

Series conv1d_forward(const Series& x, const LayerParams& p) {
    require_channels(x, p.in_ch, "conv1d");
    if (p.width != 1 && p.width != 3) throw ConfigError("conv1d: kernel width must be 1 or 3");
    const int off = p.width / 2;
    const int L = x.length;
    Series out(p.out_ch, L);
    for (int oc = 0; oc < p.out_ch; ++oc) {
        double* o = out.row(oc);
        const double b = p.bias[oc];
        for (int t = 0; t < L; ++t) o[t] = b;
        for (int ic = 0; ic < p.in_ch; ++ic) {
            const double* xi = x.row(ic);
            for (int j = 0; j < p.width; ++j) {
                const double w = p.k(oc, ic, j);
                const int lo = std::max(0, off - j);
                const int hi = std::min(L, L + off - j);
                const double* xs = xi + (j - off);
                for (int t = lo; t < hi; ++t) o[t] += w * xs[t];
            }
        }
    }
    return out;
}

Series conv1d_backward(const Series& x, const LayerParams& p, const Series& grad_out, ParamGrads& pg) {
    require_channels(x, p.in_ch, "conv1d backward");
    require_channels(grad_out, p.out_ch, "conv1d backward (grad)");
    if (grad_out.length != x.length) throw ConfigError("conv1d backward: length mismatch");
    const int off = p.width / 2;
    const int L = x.length;
    pg.kernel.assign(p.kernel.size(), 0.0);
    pg.bias.assign(p.out_ch, 0.0);
    Series gin(p.in_ch, L);
    for (int oc = 0; oc < p.out_ch; ++oc) {
        const double* go = grad_out.row(oc);
        double bsum = 0.0;
        for (int t = 0; t < L; ++t) bsum += go[t];
        pg.bias[oc] = bsum;
        for (int ic = 0; ic < p.in_ch; ++ic) {
            const double* xi = x.row(ic);
            double* gi = gin.row(ic);
            for (int j = 0; j < p.width; ++j) {
                const double w = p.k(oc, ic, j);
                const int lo = std::max(0, off - j);
                const int hi = std::min(L, L + off - j);
                double ksum = 0.0;
                for (int t = lo; t < hi; ++t) {
                    const int s = t + j - off;
                    ksum += go[t] * xi[s];
                    gi[s] += w * go[t];
                }
                pg.kernel[(static_cast<std::size_t>(oc) * p.in_ch + ic) * p.width + j] = ksum;
            }
        }
    }
    return gin;
}

Series relu_forward(const Series& x) {
    Series out = x;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    return out;
}

Series relu_backward(const Series& x, const Series& grad_out) {
    Series gin(x.channels, x.length);
    for (std::size_t i = 0; i < x.v.size(); ++i) gin.v[i] = x.v[i] > 0.0 ? grad_out.v[i] : 0.0;
    return gin;
}

Series maxpool2_forward(const Series& x, std::vector<int>& argmax) {
    if (x.length % 2 != 0) throw UsageError("maxpool2: length must be even");
    const int half = x.length / 2;
    Series out(x.channels, half);
    argmax.assign(static_cast<std::size_t>(x.channels) * half, 0);
    for (int c = 0; c < x.channels; ++c) {
        const double* xi = x.row(c);
        double* o = out.row(c);
        int* am = argmax.data() + static_cast<std::size_t>(c) * half;
        for (int i = 0; i < half; ++i) {
            const double a = xi[2 * i], b = xi[2 * i + 1];
            if (b > a) {
                o[i] = b;
                am[i] = 2 * i + 1;
            } else {
                o[i] = a;
                am[i] = 2 * i;
            }
        }
    }
    return out;
}

Series maxpool2_backward(const std::vector<int>& argmax, int channels, int in_length, const Series& grad_out) {
    const int half = in_length / 2;
    if (grad_out.length != half || grad_out.channels != channels)
        throw ConfigError("maxpool2 backward: shape mismatch");
    Series gin(channels, in_length);
    for (int c = 0; c < channels; ++c) {
        const double* go = grad_out.row(c);
        double* gi = gin.row(c);
        const int* am = argmax.data() + static_cast<std::size_t>(c) * half;
        for (int i = 0; i < half; ++i) gi[am[i]] += go[i];
    }
    return gin;
}

Series deconv2_forward(const Series& x, const LayerParams& p) {
    require_channels(x, p.in_ch, "deconv2");
    if (p.width != 2) throw ConfigError("deconv2: kernel width must be 2");
    const int L = x.length;
    Series out(p.out_ch, 2 * L);
    for (int oc = 0; oc < p.out_ch; ++oc) {
        double* o = out.row(oc);
        const double b = p.bias[oc];
        for (int t = 0; t < 2 * L; ++t) o[t] = b;
        for (int ic = 0; ic < p.in_ch; ++ic) {
            const double* xi = x.row(ic);
            const double k0 = p.k(oc, ic, 0);
            const double k1 = p.k(oc, ic, 1);
            for (int i = 0; i < L; ++i) {
                o[2 * i] += k0 * xi[i];
                o[2 * i + 1] += k1 * xi[i];
            }
        }
    }
    return out;
}

Series deconv2_backward(const Series& x, const LayerParams& p, const Series& grad_out, ParamGrads& pg) {
    require_channels(x, p.in_ch, "deconv2 backward");
    require_channels(grad_out, p.out_ch, "deconv2 backward (grad)");
    if (grad_out.length != 2 * x.length) throw ConfigError("deconv2 backward: length mismatch");
    const int L = x.length;
    pg.kernel.assign(p.kernel.size(), 0.0);
    pg.bias.assign(p.out_ch, 0.0);
    Series gin(p.in_ch, L);
    for (int oc = 0; oc < p.out_ch; ++oc) {
        const double* go = grad_out.row(oc);
        double bsum = 0.0;
        for (int t = 0; t < 2 * L; ++t) bsum += go[t];
        pg.bias[oc] = bsum;
        for (int ic = 0; ic < p.in_ch; ++ic) {
            const double* xi = x.row(ic);
            double* gi = gin.row(ic);
            const double k0 = p.k(oc, ic, 0);
            const double k1 = p.k(oc, ic, 1);
            double s0 = 0.0, s1 = 0.0;
            for (int i = 0; i < L; ++i) {
                const double g0 = go[2 * i], g1 = go[2 * i + 1];
                s0 += g0 * xi[i];
                s1 += g1 * xi[i];
                gi[i] += k0 * g0 + k1 * g1;
            }
            pg.kernel[(static_cast<std::size_t>(oc) * p.in_ch + ic) * 2 + 0] = s0;
            pg.kernel[(static_cast<std::size_t>(oc) * p.in_ch + ic) * 2 + 1] = s1;
        }
    }
    return gin;
}

Series batchnorm_forward(const Series& x, const LayerParams& p, bool training, BnCache* cache) {
    require_channels(x, p.out_ch, "batchnorm");
    const int L = x.length;
    if (L < 1) throw ConfigError("batchnorm: empty input");
    Series out(x.channels, L);
    if (cache) {
        cache->mean.assign(x.channels, 0.0);
        cache->var.assign(x.channels, 0.0);
        cache->inv_std.assign(x.channels, 0.0);
    }
    for (int c = 0; c < x.channels; ++c) {
        const double* xi = x.row(c);
        double* o = out.row(c);
        double mu, istd;
        if (training) {
            mu = 0.0;
            for (int t = 0; t < L; ++t) mu += xi[t];
            mu /= L;
            double var = 0.0;
            for (int t = 0; t < L; ++t) {
                const double d = xi[t] - mu;
                var += d * d;
            }
            var /= L;
            istd = 1.0 / std::sqrt(var + kBnEps);
            if (cache) {
                cache->mean[c] = mu;
                cache->var[c] = var;
                cache->inv_std[c] = istd;
            }
        } else {
            mu = p.run_mean[c];
            istd = 1.0 / std::sqrt(p.run_var[c] + kBnEps);
        }
        const double g = p.gamma[c], b = p.beta[c];
        for (int t = 0; t < L; ++t) o[t] = (xi[t] - mu) * istd * g + b;
    }
    return out;
}

Series batchnorm_backward(const Series& x, const LayerParams& p, const BnCache& cache, const Series& grad_out,
                          ParamGrads& pg) {
    if (cache.mean.empty()) throw UsageError("batchnorm backward: missing train-mode cache");
    require_channels(grad_out, p.out_ch, "batchnorm backward");
    const int L = x.length;
    pg.gamma.assign(p.out_ch, 0.0);
    pg.beta.assign(p.out_ch, 0.0);
    Series gin(x.channels, L);
    for (int c = 0; c < x.channels; ++c) {
        const double* xi = x.row(c);
        const double* go = grad_out.row(c);
        double* gi = gin.row(c);
        const double mu = cache.mean[c], istd = cache.inv_std[c];
        double gsum = 0.0, gxsum = 0.0;
        for (int t = 0; t < L; ++t) {
            const double xh = (xi[t] - mu) * istd;
            gsum += go[t];
            gxsum += go[t] * xh;
        }
        pg.beta[c] = gsum;
        pg.gamma[c] = gxsum;
        const double gmean = gsum / L, gxmean = gxsum / L;
        const double scale = p.gamma[c] * istd;
        for (int t = 0; t < L; ++t) {
            const double xh = (xi[t] - mu) * istd;
            gi[t] = scale * (go[t] - gmean - xh * gxmean);
        }
    }
    return gin;
}

void batchnorm_update_running(LayerParams& p, const BnCache& cache) {
    if (cache.mean.empty()) throw UsageError("batchnorm running update: missing train-mode cache");
    for (int c = 0; c < p.out_ch; ++c) {
        p.run_mean[c] = kBnMomentum * p.run_mean[c] + (1.0 - kBnMomentum) * cache.mean[c];
        p.run_var[c] = kBnMomentum * p.run_var[c] + (1.0 - kBnMomentum) * cache.var[c];
    }
}

Series concat_channels(const Series& a, const Series& b) {
    if (a.length != b.length) throw ConfigError("concat: length mismatch");
    Series out(a.channels + b.channels, a.length);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

Series softmax_channels(const Series& x) {
    if (x.channels != 2) throw ConfigError("softmax: expected exactly 2 channels");
    const int L = x.length;
    Series out(2, L);
    const double* x0 = x.row(0);
    const double* x1 = x.row(1);
    double* o0 = out.row(0);
    double* o1 = out.row(1);
    for (int t = 0; t < L; ++t) {
        const double m = std::max(x0[t], x1[t]);
        const double e0 = std::exp(x0[t] - m);
        const double e1 = std::exp(x1[t] - m);
        const double z = e0 + e1;
        o0[t] = e0 / z;
        o1[t] = e1 / z;
    }
    return out;
}

static double clamp_prob(double p) {
    return std::min(1.0 - kLogEps, std::max(kLogEps, p));
}

double weighted_cross_entropy(const Series& probs, const std::vector<std::uint8_t>& labels, double w_pos,
                              int valid_len) {
    if (probs.channels != 2) throw ConfigError("cross entropy: expected 2 probability channels");
    if (valid_len < 1 || valid_len > probs.length) throw UsageError("cross entropy: bad valid length");
    if (static_cast<int>(labels.size()) < valid_len) throw UsageError("cross entropy: labels too short");
    if (!(w_pos > 0.0)) throw ConfigError("cross entropy: w_pos must be positive");
    const double* p0 = probs.row(kBackgroundChannel);
    const double* p1 = probs.row(kPositiveChannel);
    double sum = 0.0;
    for (int t = 0; t < valid_len; ++t) {
        if (labels[t])
            sum += w_pos * std::log(clamp_prob(p1[t]));
        else
            sum += std::log(clamp_prob(p0[t]));
    }
    return -sum / valid_len;
}

Series softmax_xent_backward(const Series& probs, const std::vector<std::uint8_t>& labels, double w_pos,
                             int valid_len) {
    if (probs.channels != 2) throw ConfigError("cross entropy backward: expected 2 probability channels");
    if (valid_len < 1 || valid_len > probs.length) throw UsageError("cross entropy backward: bad valid length");
    if (static_cast<int>(labels.size()) < valid_len) throw UsageError("cross entropy backward: labels too short");
    Series g(2, probs.length);
    const double* p0 = probs.row(kBackgroundChannel);
    const double* p1 = probs.row(kPositiveChannel);
    double* g0 = g.row(kBackgroundChannel);
    double* g1 = g.row(kPositiveChannel);
    const double inv = 1.0 / valid_len;
    for (int t = 0; t < valid_len; ++t) {
        if (labels[t]) {
            g0[t] = w_pos * inv * p0[t];
            g1[t] = w_pos * inv * (p1[t] - 1.0);
        } else {
            g0[t] = inv * (p0[t] - 1.0);
            g1[t] = inv * p1[t];
        }
    }
    return g;
}

void adam_update(std::vector<double>& param, const std::vector<double>& grad, AdamSlot& slot, long step,
                 double lr, const AdamConsts& k) {
    if (param.size() != grad.size()) throw ConfigError("adam: parameter/gradient size mismatch");
    if (step < 1) throw UsageError("adam: step counts from 1");
    if (slot.m.size() != param.size()) {
        slot.m.assign(param.size(), 0.0);
        slot.v.assign(param.size(), 0.0);
    }
    const double c1 = 1.0 - std::pow(k.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(k.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        slot.m[i] = k.beta1 * slot.m[i] + (1.0 - k.beta1) * g;
        slot.v[i] = k.beta2 * slot.v[i] + (1.0 - k.beta2) * g * g;
        const double mhat = slot.m[i] / c1;
        const double vhat = slot.v[i] / c2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + k.eps);
    }
}

}  // namespace renn
