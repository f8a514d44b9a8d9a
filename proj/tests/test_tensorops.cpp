#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "renn/errors.hpp"
#include "renn/layers.hpp"
#include "renn/rng.hpp"
#include "renn/series.hpp"
#include "testutil.hpp"

using namespace renn;

namespace {

LayerParams conv_params(int in_ch, int out_ch, int width, std::vector<double> kernel,
                        std::vector<double> bias) {
    LayerParams p;
    p.in_ch = in_ch;
    p.out_ch = out_ch;
    p.width = width;
    p.kernel = std::move(kernel);
    p.bias = std::move(bias);
    return p;
}

LayerParams bn_params(int ch) {
    LayerParams p;
    p.out_ch = ch;
    p.gamma.assign(ch, 1.0);
    p.beta.assign(ch, 0.0);
    p.run_mean.assign(ch, 0.0);
    p.run_var.assign(ch, 1.0);
    return p;
}

Series series_of(std::vector<double> v) {
    Series s(1, static_cast<int>(v.size()));
    s.v = std::move(v);
    return s;
}

}  // namespace

TEST_CASE("conv3 same padding on a ramp") {
    auto p = conv_params(1, 1, 3, {1.0, 0.0, -1.0}, {0.0});
    Series out = conv1d_forward(series_of({1, 2, 3}), p);
    CHECK(out.channels == 1);
    CHECK(out.v == std::vector<double>{-2, -2, 2});
}

TEST_CASE("conv1 is a per-point channel mix") {
    auto p = conv_params(2, 1, 1, {2.0, -1.0}, {0.5});
    Series x(2, 3);
    x.v = {1, 2, 3, 10, 20, 30};
    Series out = conv1d_forward(x, p);
    CHECK(out.v == std::vector<double>{1 * 2 - 10 + 0.5, 2 * 2 - 20 + 0.5, 3 * 2 - 30 + 0.5});
}

TEST_CASE("conv bias fills the whole row") {
    auto p = conv_params(1, 2, 3, {0, 0, 0, 0, 0, 0}, {1.5, -2.0});
    Series out = conv1d_forward(series_of({7, 8}), p);
    CHECK(out.v == std::vector<double>{1.5, 1.5, -2.0, -2.0});
}

TEST_CASE("conv rejects mismatched channels and widths") {
    auto p = conv_params(2, 1, 3, std::vector<double>(6, 0.0), {0.0});
    CHECK_THROWS_AS(conv1d_forward(series_of({1, 2}), p), ConfigError);
    auto bad = conv_params(1, 1, 2, {1.0, 1.0}, {0.0});
    CHECK_THROWS_AS(conv1d_forward(series_of({1, 2}), bad), ConfigError);
}

TEST_CASE("relu clamps negatives only") {
    Series out = relu_forward(series_of({-1.0, 0.0, 2.5}));
    CHECK(out.v == std::vector<double>{0.0, 0.0, 2.5});
}

TEST_CASE("maxpool halves and remembers winners") {
    std::vector<int> am;
    Series out = maxpool2_forward(series_of({1, 5, 3, 2, 7, 7}), am);
    CHECK(out.v == std::vector<double>{5, 3, 7});
    // tie resolves to the earlier index
    CHECK(am == std::vector<int>{1, 2, 4});
}

TEST_CASE("maxpool rejects odd length") {
    std::vector<int> am;
    CHECK_THROWS_AS(maxpool2_forward(series_of({1, 2, 3}), am), UsageError);
}

TEST_CASE("maxpool backward routes to the winners") {
    std::vector<int> am{1, 2};
    Series go = series_of({10.0, 20.0});
    Series gin = maxpool2_backward(am, 1, 4, go);
    CHECK(gin.v == std::vector<double>{0, 10, 20, 0});
}

TEST_CASE("deconv doubles the length") {
    auto p = conv_params(1, 1, 2, {1.0, 2.0}, {0.0});
    Series out = deconv2_forward(series_of({3, 4}), p);
    CHECK(out.v == std::vector<double>{3, 6, 4, 8});
}

TEST_CASE("deconv bias lands on every output sample") {
    auto p = conv_params(1, 1, 2, {0.0, 0.0}, {0.25});
    Series out = deconv2_forward(series_of({3, 4}), p);
    CHECK(out.v == std::vector<double>(4, 0.25));
}

TEST_CASE("batchnorm normalizes with batch statistics in training") {
    auto p = bn_params(1);
    p.gamma = {2.0};
    p.beta = {1.0};
    BnCache cache;
    Series out = batchnorm_forward(series_of({1.0, 3.0}), p, true, &cache);
    // mean 2, var 1, so the points map to about -1 and 3 (epsilon shrinks slightly)
    CHECK(out.v[0] == doctest::Approx(-0.9999900000749995).epsilon(1e-12));
    CHECK(out.v[1] == doctest::Approx(2.9999900000749995).epsilon(1e-12));
    CHECK(cache.mean[0] == 2.0);
    CHECK(cache.var[0] == 1.0);
}

TEST_CASE("batchnorm inference uses running statistics") {
    auto p = bn_params(1);
    p.run_mean = {5.0};
    p.run_var = {4.0};
    Series out = batchnorm_forward(series_of({5.0, 7.0}), p, false, nullptr);
    CHECK(out.v[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(out.v[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("running statistics blend with momentum 0.9") {
    auto p = bn_params(1);
    BnCache cache;
    cache.mean = {10.0};
    cache.var = {2.0};
    batchnorm_update_running(p, cache);
    CHECK(p.run_mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 10.0));
    CHECK(p.run_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));
}

TEST_CASE("concat stacks channel blocks in order") {
    Series a(1, 2), b(2, 2);
    a.v = {1, 2};
    b.v = {3, 4, 5, 6};
    Series out = concat_channels(a, b);
    CHECK(out.channels == 3);
    CHECK(out.v == std::vector<double>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("softmax over the two channels") {
    Series x(2, 1);
    x.v = {std::log(2.0), 0.0};
    Series out = softmax_channels(x);
    CHECK(out.v[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(out.v[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax rows always sum to one") {
    Series x = testutil::random_input(2, 64, 99, 30.0);  // large logits stay stable
    Series out = softmax_channels(x);
    for (int t = 0; t < out.length; ++t) {
        CHECK(out.at(0, t) + out.at(1, t) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out.at(0, t) >= 0.0);
    }
}

TEST_CASE("cross entropy of a fifty-fifty positive is ln 2") {
    Series p(2, 1);
    p.v = {0.5, 0.5};
    CHECK(weighted_cross_entropy(p, {1}, 1.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("positive weight scales only labeled samples") {
    Series p(2, 2);
    p.v = {0.5, 0.5, 0.5, 0.5};
    const double base = weighted_cross_entropy(p, {1, 0}, 1.0, 2);
    const double weighted = weighted_cross_entropy(p, {1, 0}, 3.0, 2);
    CHECK(weighted == doctest::Approx(base + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy ignores the padded tail") {
    Series p(2, 4);
    p.v = {0.5, 0.5, 0.9, 0.1, 0.5, 0.5, 0.1, 0.9};
    const double full = weighted_cross_entropy(p, {1, 0, 0, 0}, 1.0, 2);
    p.at(0, 2) = 0.001;  // tail values must not matter
    p.at(1, 2) = 0.999;
    CHECK(weighted_cross_entropy(p, {1, 0, 0, 0}, 1.0, 2) == full);
}

TEST_CASE("cross entropy validates its inputs") {
    Series p(2, 2);
    p.v = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(weighted_cross_entropy(p, {1, 0}, 0.0, 2), ConfigError);
    CHECK_THROWS_AS(weighted_cross_entropy(p, {1, 0}, 1.0, 3), UsageError);
    CHECK_THROWS_AS(weighted_cross_entropy(p, {1}, 1.0, 2), UsageError);
}

TEST_CASE("fused softmax gradient matches finite differences") {
    Rng rng(4242);
    Series logits(2, 16);
    for (double& v : logits.v) v = rng.gaussian();
    std::vector<std::uint8_t> y(16, 0);
    y[3] = y[11] = 1;
    const double w_pos = 2.5;
    const int valid = 12;  // leave a masked tail
    const Series probs = softmax_channels(logits);
    const Series g = softmax_xent_backward(probs, y, w_pos, valid);
    const double h = 1e-6;
    for (int c = 0; c < 2; ++c) {
        for (int t = 0; t < 16; ++t) {
            Series lp = logits, lm = logits;
            lp.at(c, t) += h;
            lm.at(c, t) -= h;
            const double fp = weighted_cross_entropy(softmax_channels(lp), y, w_pos, valid);
            const double fm = weighted_cross_entropy(softmax_channels(lm), y, w_pos, valid);
            const double fd = (fp - fm) / (2 * h);
            CHECK(g.at(c, t) == doctest::Approx(fd).epsilon(1e-5));
            if (t >= valid) CHECK(g.at(c, t) == 0.0);
        }
    }
}

// Per-layer finite-difference checks against a scalar readout sum(w .* out),
// with fixed pseudo-random readout weights.
namespace {

double readout(const Series& out, std::uint64_t seed) {
    Rng rng(seed);
    double s = 0.0;
    for (double v : out.v) s += v * rng.uniform(-1.0, 1.0);
    return s;
}

Series readout_grad(const Series& out, std::uint64_t seed) {
    Rng rng(seed);
    Series g(out.channels, out.length);
    for (double& v : g.v) v = rng.uniform(-1.0, 1.0);
    return g;
}

}  // namespace

TEST_CASE("conv backward matches finite differences") {
    auto p = conv_params(2, 3, 3, {}, {});
    Rng rng(7);
    p.kernel.resize(18);
    for (double& w : p.kernel) w = rng.gaussian();
    p.bias = {0.1, -0.2, 0.3};
    Series x = testutil::random_input(2, 10, 8);
    const std::uint64_t ro = 55;
    ParamGrads pg;
    Series gin = conv1d_backward(x, p, readout_grad(conv1d_forward(x, p), ro), pg);
    const double h = 1e-6;
    auto fd_of = [&](double* slot) {
        const double save = *slot;
        *slot = save + h;
        const double fp = readout(conv1d_forward(x, p), ro);
        *slot = save - h;
        const double fm = readout(conv1d_forward(x, p), ro);
        *slot = save;
        return (fp - fm) / (2 * h);
    };
    for (std::size_t j = 0; j < p.kernel.size(); ++j)
        CHECK(pg.kernel[j] == doctest::Approx(fd_of(&p.kernel[j])).epsilon(1e-6));
    for (std::size_t j = 0; j < p.bias.size(); ++j)
        CHECK(pg.bias[j] == doctest::Approx(fd_of(&p.bias[j])).epsilon(1e-6));
    for (std::size_t j = 0; j < x.v.size(); ++j)
        CHECK(gin.v[j] == doctest::Approx(fd_of(&x.v[j])).epsilon(1e-6));
}

TEST_CASE("deconv backward matches finite differences") {
    auto p = conv_params(2, 2, 2, {}, {});
    Rng rng(17);
    p.kernel.resize(8);
    for (double& w : p.kernel) w = rng.gaussian();
    p.bias = {0.05, -0.1};
    Series x = testutil::random_input(2, 6, 18);
    const std::uint64_t ro = 56;
    ParamGrads pg;
    Series gin = deconv2_backward(x, p, readout_grad(deconv2_forward(x, p), ro), pg);
    const double h = 1e-6;
    auto fd_of = [&](double* slot) {
        const double save = *slot;
        *slot = save + h;
        const double fp = readout(deconv2_forward(x, p), ro);
        *slot = save - h;
        const double fm = readout(deconv2_forward(x, p), ro);
        *slot = save;
        return (fp - fm) / (2 * h);
    };
    for (std::size_t j = 0; j < p.kernel.size(); ++j)
        CHECK(pg.kernel[j] == doctest::Approx(fd_of(&p.kernel[j])).epsilon(1e-6));
    for (std::size_t j = 0; j < p.bias.size(); ++j)
        CHECK(pg.bias[j] == doctest::Approx(fd_of(&p.bias[j])).epsilon(1e-6));
    for (std::size_t j = 0; j < x.v.size(); ++j)
        CHECK(gin.v[j] == doctest::Approx(fd_of(&x.v[j])).epsilon(1e-6));
}

TEST_CASE("batchnorm backward matches finite differences through batch statistics") {
    auto p = bn_params(2);
    p.gamma = {1.3, 0.7};
    p.beta = {0.2, -0.4};
    Series x = testutil::random_input(2, 12, 31);
    const std::uint64_t ro = 57;
    BnCache cache;
    Series out = batchnorm_forward(x, p, true, &cache);
    ParamGrads pg;
    Series gin = batchnorm_backward(x, p, cache, readout_grad(out, ro), pg);
    const double h = 1e-6;
    auto fd_of = [&](double* slot) {
        const double save = *slot;
        *slot = save + h;
        BnCache c2;
        const double fp = readout(batchnorm_forward(x, p, true, &c2), ro);
        *slot = save - h;
        const double fm = readout(batchnorm_forward(x, p, true, &c2), ro);
        *slot = save;
        return (fp - fm) / (2 * h);
    };
    for (int c = 0; c < 2; ++c) {
        CHECK(pg.gamma[c] == doctest::Approx(fd_of(&p.gamma[c])).epsilon(1e-5));
        CHECK(pg.beta[c] == doctest::Approx(fd_of(&p.beta[c])).epsilon(1e-5));
    }
    for (std::size_t j = 0; j < x.v.size(); ++j)
        CHECK(gin.v[j] == doctest::Approx(fd_of(&x.v[j])).epsilon(1e-5));
}

TEST_CASE("adam takes the documented first step") {
    std::vector<double> param{1.0};
    std::vector<double> grad{0.5};
    AdamSlot slot;
    adam_update(param, grad, slot, 1, 0.1);
    CHECK(param[0] == doctest::Approx(0.9000000019999999).epsilon(1e-15));
}

TEST_CASE("adam validates shapes and step counting") {
    std::vector<double> param{1.0};
    std::vector<double> grad{0.5, 0.5};
    AdamSlot slot;
    CHECK_THROWS_AS(adam_update(param, grad, slot, 1, 0.1), ConfigError);
    std::vector<double> g1{0.5};
    CHECK_THROWS_AS(adam_update(param, g1, slot, 0, 0.1), UsageError);
}

TEST_CASE("adam with zero gradient leaves parameters in place") {
    std::vector<double> param{2.0, -3.0};
    std::vector<double> grad{0.0, 0.0};
    AdamSlot slot;
    adam_update(param, grad, slot, 1, 0.1);
    CHECK(param[0] == doctest::Approx(2.0));
    CHECK(param[1] == doctest::Approx(-3.0));
}

TEST_CASE("series bookkeeping") {
    Series s(2, 3);
    s.at(1, 2) = 4.5;
    CHECK(s.v[5] == 4.5);
    CHECK(s.all_finite());
    s.at(0, 0) = NAN;
    CHECK(!s.all_finite());
}

TEST_CASE("rng reproduces the reference stream") {
    Rng rng(1234567);
    CHECK(rng.next_u64() == 6457827717110365317ULL);
    CHECK(rng.next_u64() == 3203168211198807973ULL);
    CHECK(rng.next_u64() == 9817491932198370423ULL);
    CHECK(rng.next_u64() == 4593380528125082431ULL);
    CHECK(rng.next_u64() == 16408922859458223821ULL);
}

TEST_CASE("rng uniform stays in range and matches the stream") {
    Rng rng(1234567);
    CHECK(rng.uniform() == doctest::Approx(0.3500795420214081).epsilon(1e-15));
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("gaussian draws have sane first moments") {
    Rng rng(13);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("derived seeds differ per stream index") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(1, 0) == derive_seed(1, 0));
}
