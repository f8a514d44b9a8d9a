#include "renn/rulemod.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "renn/errors.hpp"

namespace renn {

std::vector<int> pick_candidates(const std::vector<double>& f_pos, double threshold, double min_sep_s,
                                 double fs) {
    if (!(fs > 0.0)) throw ConfigError("pick_candidates: fs must be positive");
    if (!(min_sep_s > 0.0)) throw ConfigError("pick_candidates: min_sep_s must be positive");
    const int n = static_cast<int>(f_pos.size());
    std::vector<int> maxima;
    for (int t = 0; t < n; ++t) {
        const double v = f_pos[t];
        if (!(v > threshold)) continue;
        const bool left_ok = (t == 0) || f_pos[t - 1] < v;
        const bool right_ok = (t == n - 1) || f_pos[t + 1] < v;
        if (left_ok && right_ok) maxima.push_back(t);
    }
    std::stable_sort(maxima.begin(), maxima.end(),
                     [&](int a, int b) { return f_pos[a] > f_pos[b]; });
    const double min_sep = min_sep_s * fs;
    std::vector<int> kept;
    for (int cand : maxima) {
        bool clear = true;
        for (int k : kept)
            if (std::abs(cand - k) < min_sep) {
                clear = false;
                break;
            }
        if (clear) kept.push_back(cand);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

Rhythm estimate_rhythm(const std::vector<int>& peaks, double fs) {
    if (!(fs > 0.0)) throw ConfigError("estimate_rhythm: fs must be positive");
    std::vector<double> z;
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        const double dt = (peaks[i] - peaks[i - 1]) / fs;
        if (dt >= kMinIntervalS && dt <= kMaxIntervalS) z.push_back(dt);
    }
    if (z.size() < 2) return {};
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / v.size();
    };
    auto std_of = [](const std::vector<double>& v, double mu) {
        double s = 0.0;
        for (double x : v) s += (x - mu) * (x - mu);
        return std::sqrt(s / v.size());
    };
    const double mu = mean_of(z);
    const double sd = std_of(z, mu);
    std::vector<double> kept;
    for (double x : z)
        if (std::abs(x - mu) <= 3.0 * sd) kept.push_back(x);
    if (kept.size() < 2) return {};
    Rhythm r;
    r.hr_s = mean_of(kept);
    r.sdnn_s = std_of(kept, r.hr_s);
    r.valid = true;
    return r;
}

double region_width(int order, double sdnn_s, double fs) {
    return std::max(kMinRegionWidth, std::round(6.0 * std::sqrt(static_cast<double>(order)) * sdnn_s * fs));
}

std::vector<SupportRegion> support_regions(int t, const Rhythm& rhythm, int length, double fs) {
    if (!rhythm.valid) throw UsageError("support_regions: rhythm is invalid; use the zero rule map instead");
    if (!(fs > 0.0)) throw ConfigError("support_regions: fs must be positive");
    const double step = rhythm.hr_s * fs;
    std::vector<SupportRegion> out;
    for (int side : {-1, +1}) {
        double prev_w = -1.0;
        for (int k = 1; k <= kMaxRegionsPerSide; ++k) {
            const double w = region_width(k, rhythm.sdnn_s, fs);
            if (prev_w >= 0.0 && (w + prev_w) * 0.5 > step) break;  // would overlap its predecessor
            const double c = t + side * k * step;
            if (c + w / 2 < 0.0 || c - w / 2 > length - 1.0) {  // entirely off the signal
                prev_w = w;
                continue;
            }
            out.push_back(SupportRegion{c, w, k});
            prev_w = w;
        }
    }
    return out;
}

double vote(const std::vector<double>& f_pos, const std::vector<SupportRegion>& regions) {
    const int n = static_cast<int>(f_pos.size());
    double num = 0.0, den = 0.0;
    for (const SupportRegion& reg : regions) {
        if (!(reg.width > 0.0)) throw ConfigError("vote: region width must be positive");
        int lo = static_cast<int>(std::ceil(reg.center - reg.width / 2));
        int hi = static_cast<int>(std::floor(reg.center + reg.width / 2));
        lo = std::max(lo, 0);
        hi = std::min(hi, n - 1);
        if (lo > hi) continue;
        double m = f_pos[lo];
        int am = lo;
        for (int i = lo + 1; i <= hi; ++i)
            if (f_pos[i] > m) {
                m = f_pos[i];
                am = i;
            }
        const double d = am - reg.center;
        const double w = std::exp(-(d * d) / (2.0 * reg.width * reg.width)) / (kSqrt2Pi * reg.width);
        num += w * m / reg.width;
        den += 1.0 / reg.width;
    }
    return den == 0.0 ? 0.0 : num / den;
}

std::vector<double> rule_modulate(const Series& feature_map, double fs) {
    if (feature_map.channels != 2) throw ConfigError("rule_modulate: expected a 2-channel probability map");
    const int T = feature_map.length;
    const double* fp = feature_map.row(kPositiveChannel);
    const std::vector<double> f_pos(fp, fp + T);

    const auto cands = pick_candidates(f_pos, kCandidateThreshold, kMinPeakSeparationS, fs);
    const Rhythm rhythm = estimate_rhythm(cands, fs);
    std::vector<double> R(T, 0.0);
    if (!rhythm.valid) return R;

    const double step = rhythm.hr_s * fs;
    std::vector<double> widths;
    for (int k = 1; k <= kMaxRegionsPerSide; ++k) {
        const double w = region_width(k, rhythm.sdnn_s, fs);
        if (!widths.empty() && (w + widths.back()) * 0.5 > step) break;
        widths.push_back(w);
    }

    std::vector<double> num(T, 0.0), den(T, 0.0);
    std::deque<int> dq;
    for (int side : {-1, +1}) {
        for (std::size_t ki = 0; ki < widths.size(); ++ki) {
            const double w = widths[ki];
            const double d = side * static_cast<double>(ki + 1) * step;
            dq.clear();
            int pushed = -1;  // highest index already offered to the deque
            for (int t = 0; t < T; ++t) {
                // Bounds use the same rounded center t + d as the per-point
                // voter; deriving them from precomputed offsets shifts the
                // window by one whenever t + d lands on an integer.
                const double c = t + d;
                const int lo = std::max(static_cast<int>(std::ceil(c - w / 2)), 0);
                const int hi = std::min(static_cast<int>(std::floor(c + w / 2)), T - 1);
                if (lo > hi) continue;  // window entirely off the signal
                for (int i = std::max(pushed + 1, lo); i <= hi; ++i) {
                    while (!dq.empty() && f_pos[dq.back()] < f_pos[i]) dq.pop_back();
                    dq.push_back(i);
                    pushed = i;
                }
                while (!dq.empty() && dq.front() < lo) dq.pop_front();
                if (dq.empty()) continue;
                const int am = dq.front();  // earliest index holding the window max
                const double m = f_pos[am];
                const double dc = am - c;
                const double wt = std::exp(-(dc * dc) / (2.0 * w * w)) / (kSqrt2Pi * w);
                num[t] += wt * m / w;
                den[t] += 1.0 / w;
            }
        }
    }
    for (int t = 0; t < T; ++t) R[t] = den[t] > 0.0 ? num[t] / den[t] : 0.0;
    return R;
}

}  // namespace renn
