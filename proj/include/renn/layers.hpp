#pragma once

#include <cstdint>
#include <vector>

#include "renn/series.hpp"

namespace renn {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;
constexpr double kLogEps = 1e-12;

// Parameters of one convolution-like or batch-norm layer.
// Kernel layout: [out_ch][in_ch][width], row-major.
struct LayerParams {
    int in_ch = 0;
    int out_ch = 0;
    int width = 0;
    std::vector<double> kernel;
    std::vector<double> bias;
    // batch norm only, one entry per channel
    std::vector<double> gamma, beta, run_mean, run_var;

    double& k(int oc, int ic, int j) {
        return kernel[(static_cast<std::size_t>(oc) * in_ch + ic) * width + j];
    }
    double k(int oc, int ic, int j) const {
        return kernel[(static_cast<std::size_t>(oc) * in_ch + ic) * width + j];
    }
};

// Gradients with the same shapes as the corresponding LayerParams grids.
struct ParamGrads {
    std::vector<double> kernel, bias, gamma, beta;
};

// Train-mode batch statistics, needed for the backward pass and for the
// running-statistics update.
struct BnCache {
    std::vector<double> mean, var, inv_std;
};

// Convolution along time, kernel width 1 or 3. Width 3 is zero same-padded and
// centered; width 1 is a pointwise map.
Series conv1d_forward(const Series& x, const LayerParams& p);
Series conv1d_backward(const Series& x, const LayerParams& p, const Series& grad_out, ParamGrads& pg);

Series relu_forward(const Series& x);
Series relu_backward(const Series& x, const Series& grad_out);

// Halving max pool, window 2 stride 2. Ties resolve to the earlier index.
Series maxpool2_forward(const Series& x, std::vector<int>& argmax);
Series maxpool2_backward(const std::vector<int>& argmax, int channels, int in_length, const Series& grad_out);

// Doubling transposed convolution, kernel width 2:
// out[2i] += k0 * x[i], out[2i+1] += k1 * x[i], summed over input channels, plus bias.
Series deconv2_forward(const Series& x, const LayerParams& p);
Series deconv2_backward(const Series& x, const LayerParams& p, const Series& grad_out, ParamGrads& pg);

// Per-channel normalization over the time axis. In training mode batch
// statistics are used and recorded in the cache; otherwise running statistics.
Series batchnorm_forward(const Series& x, const LayerParams& p, bool training, BnCache* cache);
Series batchnorm_backward(const Series& x, const LayerParams& p, const BnCache& cache, const Series& grad_out,
                          ParamGrads& pg);
void batchnorm_update_running(LayerParams& p, const BnCache& cache);

Series concat_channels(const Series& a, const Series& b);

// Per-time-point softmax over exactly two channels, max-subtracted.
Series softmax_channels(const Series& x);

// -(1/n) * sum_t [w_pos * y_t * ln p_pos + (1 - y_t) * ln p_neg] over t < valid_len,
// probabilities clamped away from 0 and 1 before the log.
double weighted_cross_entropy(const Series& probs, const std::vector<std::uint8_t>& labels, double w_pos,
                              int valid_len);
// Gradient of the same loss with respect to the pre-softmax logits.
Series softmax_xent_backward(const Series& probs, const std::vector<std::uint8_t>& labels, double w_pos,
                             int valid_len);

// Adam moment grids for one parameter grid; sized lazily on first use.
struct AdamSlot {
    std::vector<double> m, v;
};

struct AdamConsts {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update; step counts from 1.
void adam_update(std::vector<double>& param, const std::vector<double>& grad, AdamSlot& slot, long step,
                 double lr, const AdamConsts& k = {});

}  // namespace renn
