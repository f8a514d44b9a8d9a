#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "renn/layers.hpp"
#include "renn/series.hpp"

namespace renn {

enum class LayerKind { Conv, Relu, BatchNorm, MaxPool, Deconv, Concat, Softmax };

struct LayerSpec {
    LayerKind kind{};
    int in_ch = 0;
    int out_ch = 0;
    int width = 0;
    int concat_tap = -1;  // Concat: index of the layer whose cached output joins the main path
};

inline constexpr int kPoolLevels = 4;
inline constexpr int kLengthMultiple = 16;  // 2^kPoolLevels
inline constexpr int kOutChannels = 2;

struct FcnConfig {
    int in_channels = 1;
    int hidden_channels = 8;
    std::uint64_t seed = 1;
};

// Encoder-decoder over a single record: four halving levels with skip taps at
// the encoder batch-norm outputs, mirrored by four doubling levels that fuse
// the taps by channel concat, ending in a two-channel softmax map.
struct Model {
    FcnConfig config;
    std::vector<LayerSpec> layers;
    std::vector<LayerParams> params;  // aligned with layers; empty grids for non-parametric ones
    bool training = true;
};

std::vector<LayerSpec> canonical_layer_specs(const FcnConfig& config);
Model build_fcn(const FcnConfig& config);

struct LayerCensus {
    int conv = 0, batchnorm = 0, maxpool = 0, deconv = 0, concat = 0;
};

LayerCensus census(const Model& m);
long trainable_parameter_count(const Model& m);

struct ForwardCache {
    Series input;
    std::vector<Series> out;                    // per layer
    std::vector<std::vector<int>> pool_argmax;  // per layer, used by MaxPool entries
    std::vector<BnCache> bn;                    // per layer, used by BatchNorm entries
};

// Forward pass. Input length must be a multiple of 16 (see pad_to_pool).
// Running statistics are never touched here; after a train-mode forward, call
// update_running_stats with the cache to fold the batch statistics in.
Series model_forward(const Model& m, const Series& x, ForwardCache* cache = nullptr);
void update_running_stats(Model& m, const ForwardCache& cache);

struct ModelGrads {
    std::vector<ParamGrads> layers;
};

// Gradient of the weighted cross-entropy at the cached forward pass with
// respect to every trainable grid. Returns the loss. Only the first valid_len
// time points contribute; padded tails are masked out.
double model_backward(const Model& m, const ForwardCache& cache, const std::vector<std::uint8_t>& labels,
                      double w_pos, int valid_len, ModelGrads& grads);

// Reflect-pads the tail so the length becomes the next multiple of 16.
// Returns the padded series and the original length.
std::pair<Series, int> pad_to_pool(const Series& x);
Series trim_to(const Series& x, int length);

// Width of the input window seen by one output of the given layer chain,
// by the recurrence r += (k - 1) * j; j *= s. Defined for the downsampling
// path only (conv / pool / relu / batchnorm).
long receptive_field(const std::vector<LayerSpec>& layers);
// Same recurrence applied to the canonical encoder, through the last pool.
long encoder_receptive_field(const FcnConfig& config);

// Trainable grids in declaration order (kernel, bias per conv or deconv;
// gamma, beta per batch norm). Gradient grids line up one to one.
std::vector<std::vector<double>*> trainable_grids(Model& m);
std::vector<const std::vector<double>*> trainable_grids(const Model& m);
std::vector<std::vector<double>*> grad_grids(ModelGrads& g, const Model& m);

struct ModelAdam {
    std::vector<AdamSlot> slots;
    long step = 0;
};

void adam_step_model(Model& m, ModelGrads& grads, ModelAdam& state, double lr);

}  // namespace renn
