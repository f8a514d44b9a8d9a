#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace renn {

struct EcgRecord {
    int fs = 0;                  // samples per second
    std::vector<double> signal;  // millivolts
    std::vector<int> labels;     // ascending sample indices of R peaks
    std::string record_id;
};

struct NoiseConfig {
    double white_sigma_mv = 0.0;
    double baseline_amp_mv = 0.0;
    double baseline_freq_hz = 0.30;
    double ac_amp_mv = 0.0;
    double ac_freq_hz = 50.0;
    double dropout_prob = 0.0;  // chance a beat is silently skipped
};

struct SynthConfig {
    double duration_s = 12.0;
    int fs = 125;
    double mean_rr_s = 0.8;
    double rr_jitter_s = 0.02;    // must stay under a quarter of mean_rr_s
    double r_amplitude_mv = 1.0;  // the R bump peaks at this value
    NoiseConfig noise;
    std::uint64_t seed = 1;
};

// Clean PQRST train: five Gaussian bumps per beat, the first R at half the
// mean interval, subsequent intervals jittered by a +-3 sigma clamped normal.
// Generation stops when the next T wave would run past the record. Labels sit
// on the rendered R maxima. Beats hit by dropout leave no waveform and no
// label. Deterministic in the seed.
EcgRecord synth_ecg(const SynthConfig& config);

// Additive white / baseline-wander / mains contamination; labels untouched.
// All amplitudes zero reproduces the record bit for bit.
EcgRecord add_noise(const EcgRecord& rec, const NoiseConfig& noise, std::uint64_t seed);

// Zero-phase 1-32 Hz band-pass: a two-pole high-pass at 1 Hz and a four-pole
// low-pass at 32 Hz as second-order sections, run forward-backward.
// Requires fs > 64.
EcgRecord bandpass(const EcgRecord& rec);

}  // namespace renn
