#pragma once

#include <vector>

#include "renn/series.hpp"

namespace renn {

// Fixed operating constants of the rhythm rules.
inline constexpr double kCandidateThreshold = 0.5;
inline constexpr double kMinPeakSeparationS = 0.3;
inline constexpr double kMinIntervalS = 0.3;   // physiologic RR range, seconds
inline constexpr double kMaxIntervalS = 1.5;
inline constexpr double kMinRegionWidth = 3.0;  // samples
inline constexpr int kMaxRegionsPerSide = 3;
inline constexpr double kSqrt2Pi = 2.506628274631000502415765284811;

struct Rhythm {
    double hr_s = 0.0;    // mean surviving RR interval, seconds
    double sdnn_s = 0.0;  // their standard deviation, seconds
    bool valid = false;
};

// One voting window, in sample units. center may be fractional and may stick
// out past the signal; vote() clips it.
struct SupportRegion {
    double center = 0.0;
    double width = 0.0;
    int order = 0;  // how many expected beats away, 1..kMaxRegionsPerSide
};

// Strict local maxima above threshold, then greedy suppression: candidates in
// descending value order, dropping any within min_sep_s of a kept one.
// Returns ascending sample indices.
std::vector<int> pick_candidates(const std::vector<double>& f_pos, double threshold, double min_sep_s,
                                 double fs);

// RR statistics of consecutive candidate intervals: range-filter to the
// physiologic window, one 3-sigma trim, then mean and (population) std of the
// survivors. Needs at least two surviving intervals to be valid.
Rhythm estimate_rhythm(const std::vector<int>& peaks, double fs);

double region_width(int order, double sdnn_s, double fs);

// Voting windows around expected beat positions on both sides of t, up to
// kMaxRegionsPerSide per side. A side stops at the first window that would
// overlap its predecessor; windows entirely outside the signal are dropped.
std::vector<SupportRegion> support_regions(int t, const Rhythm& rhythm, int length, double fs);

// Gaussian-weighted vote of the window maxima:
//   R = sum_i(w_i * m_i / l_i) / sum_i(1 / l_i),
//   w_i = exp(-(argmax_i - c_i)^2 / (2 l_i^2)) / (sqrt(2 pi) * l_i),
// argmax resolving ties to the earliest index. No usable regions give 0.
double vote(const std::vector<double>& f_pos, const std::vector<SupportRegion>& regions);

// Full per-time-point rule map of a two-channel probability map. Internally a
// sliding-window pass per (side, order) band; when the rhythm cannot be
// estimated the map is all zeros.
std::vector<double> rule_modulate(const Series& feature_map, double fs);

}  // namespace renn
