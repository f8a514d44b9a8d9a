#include "renn/ecgsynth.hpp"

#include <algorithm>
#include <cmath>

#include "renn/errors.hpp"
#include "renn/rng.hpp"
#include "renn/rulemod.hpp"

namespace renn {

namespace {

struct Bump {
    double offset_s, width_s, amp;
};

// P, Q, R, S, T as Gaussians relative to the R peak; amp is relative to the
// R amplitude.
constexpr Bump kBeatShape[5] = {
    {-0.20, 0.040, 0.15},
    {-0.05, 0.010, -0.10},
    {0.00, 0.012, 1.00},
    {0.05, 0.012, -0.25},
    {0.30, 0.060, 0.35},
};

// How far past the R peak a beat still renders (T offset + 3 T widths).
constexpr double kBeatTail = 0.30 + 3 * 0.060;
constexpr double kBumpSupportSigmas = 5.0;

void render_beat(std::vector<double>& sig, double t_r, double r_amp, double fs) {
    const int n = static_cast<int>(sig.size());
    for (const Bump& b : kBeatShape) {
        const double center = t_r + b.offset_s;
        const double reach = kBumpSupportSigmas * b.width_s;
        const int lo = std::max(0, static_cast<int>(std::ceil((center - reach) * fs)));
        const int hi = std::min(n - 1, static_cast<int>(std::floor((center + reach) * fs)));
        const double a = b.amp * r_amp;
        const double denom = 2.0 * b.width_s * b.width_s;
        for (int i = lo; i <= hi; ++i) {
            const double d = i / fs - center;
            sig[i] += a * std::exp(-d * d / denom);
        }
    }
}

}  // namespace

EcgRecord synth_ecg(const SynthConfig& cfg) {
    if (!(cfg.duration_s > 0.0)) throw ConfigError("synth_ecg: duration must be positive");
    if (cfg.fs < 1) throw ConfigError("synth_ecg: fs must be positive");
    if (!(cfg.mean_rr_s >= kMinIntervalS && cfg.mean_rr_s <= kMaxIntervalS))
        throw ConfigError("synth_ecg: mean RR must lie in [0.3, 1.5] s");
    if (!(cfg.rr_jitter_s >= 0.0)) throw ConfigError("synth_ecg: RR jitter must be non-negative");
    if (!(cfg.mean_rr_s > 4.0 * cfg.rr_jitter_s))
        throw ConfigError("synth_ecg: mean RR must exceed four times the jitter");
    if (!(cfg.r_amplitude_mv > 0.0)) throw ConfigError("synth_ecg: R amplitude must be positive");
    if (!(cfg.noise.dropout_prob >= 0.0 && cfg.noise.dropout_prob <= 1.0))
        throw ConfigError("synth_ecg: dropout probability must lie in [0, 1]");

    const double fs = static_cast<double>(cfg.fs);
    EcgRecord rec;
    rec.fs = cfg.fs;
    rec.signal.assign(static_cast<std::size_t>(std::lround(cfg.duration_s * fs)), 0.0);

    Rng rng(cfg.seed);
    double t_r = 0.5 * cfg.mean_rr_s;
    while (t_r + kBeatTail <= cfg.duration_s + 1e-12) {
        const bool dropped = rng.uniform() < cfg.noise.dropout_prob;
        if (!dropped) {
            render_beat(rec.signal, t_r, cfg.r_amplitude_mv, fs);
            rec.labels.push_back(static_cast<int>(std::lround(t_r * fs)));
        }
        const double eta = std::clamp(rng.gaussian() * cfg.rr_jitter_s, -3.0 * cfg.rr_jitter_s,
                                      3.0 * cfg.rr_jitter_s);
        t_r += cfg.mean_rr_s + eta;
    }
    return rec;
}

EcgRecord add_noise(const EcgRecord& rec, const NoiseConfig& noise, std::uint64_t seed) {
    if (!(noise.white_sigma_mv >= 0.0 && noise.baseline_amp_mv >= 0.0 && noise.ac_amp_mv >= 0.0))
        throw ConfigError("add_noise: amplitudes must be non-negative");
    EcgRecord out = rec;
    Rng rng(seed);
    const double phase_baseline = rng.uniform(0.0, kTwoPi);
    const double phase_ac = rng.uniform(0.0, kTwoPi);
    const double fs = static_cast<double>(rec.fs);
    for (std::size_t i = 0; i < out.signal.size(); ++i) {
        const double t = static_cast<double>(i) / fs;
        if (noise.white_sigma_mv > 0.0) out.signal[i] += noise.white_sigma_mv * rng.gaussian();
        if (noise.baseline_amp_mv > 0.0)
            out.signal[i] += noise.baseline_amp_mv * std::sin(kTwoPi * noise.baseline_freq_hz * t + phase_baseline);
        if (noise.ac_amp_mv > 0.0)
            out.signal[i] += noise.ac_amp_mv * std::sin(kTwoPi * noise.ac_freq_hz * t + phase_ac);
    }
    return out;
}

namespace {

struct Biquad {
    double b0, b1, b2, a1, a2;
};

Biquad design_highpass(double fc, double fs, double q) {
    const double w = kTwoPi * fc / fs;
    const double cosw = std::cos(w), alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    return {(1.0 + cosw) / 2.0 / a0, -(1.0 + cosw) / a0, (1.0 + cosw) / 2.0 / a0, -2.0 * cosw / a0,
            (1.0 - alpha) / a0};
}

Biquad design_lowpass(double fc, double fs, double q) {
    const double w = kTwoPi * fc / fs;
    const double cosw = std::cos(w), alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    return {(1.0 - cosw) / 2.0 / a0, (1.0 - cosw) / a0, (1.0 - cosw) / 2.0 / a0, -2.0 * cosw / a0,
            (1.0 - alpha) / a0};
}

// Transposed direct-form II with the steady-state initial condition for the
// first sample, so constant inputs produce their DC response immediately.
void filt_inplace(std::vector<double>& x, const Biquad& f) {
    const double h1 = (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);  // DC gain
    const double x0 = x.empty() ? 0.0 : x.front();
    double z2 = (f.b2 - f.a2 * h1) * x0;
    double z1 = (f.b1 - f.a1 * h1) * x0 + z2;
    for (double& v : x) {
        const double in = v;
        const double y = f.b0 * in + z1;
        z1 = f.b1 * in - f.a1 * y + z2;
        z2 = f.b2 * in - f.a2 * y;
        v = y;
    }
}

void filtfilt(std::vector<double>& x, const std::vector<Biquad>& sections) {
    if (x.size() < 2) return;
    // odd-reflection padding keeps the turnaround transients off the signal
    const std::size_t pad = std::min(x.size() - 1, static_cast<std::size_t>(256));
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.front() - x[pad - i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.back() - x[x.size() - 2 - i]);

    for (const Biquad& f : sections) filt_inplace(ext, f);
    std::reverse(ext.begin(), ext.end());
    for (const Biquad& f : sections) filt_inplace(ext, f);
    std::reverse(ext.begin(), ext.end());

    std::copy(ext.begin() + pad, ext.begin() + pad + x.size(), x.begin());
}

}  // namespace

EcgRecord bandpass(const EcgRecord& rec) {
    if (rec.fs <= 64) throw ConfigError("bandpass: sampling rate must exceed 64 Hz");
    const double fs = static_cast<double>(rec.fs);
    // 4th-order Butterworth low-pass splits into sections with these Qs
    const std::vector<Biquad> sections = {
        design_highpass(1.0, fs, 0.70710678118654752),
        design_lowpass(32.0, fs, 0.54119610014619698),
        design_lowpass(32.0, fs, 1.30656296487637653),
    };
    EcgRecord out = rec;
    filtfilt(out.signal, sections);
    return out;
}

}  // namespace renn
