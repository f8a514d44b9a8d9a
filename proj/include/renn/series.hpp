#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace renn {

// Dense [channels x length] grid of doubles, one contiguous row per channel.
struct Series {
    int channels = 0;
    int length = 0;
    std::vector<double> v;

    Series() = default;
    Series(int c, int len)
        : channels(c), length(len), v(static_cast<std::size_t>(c) * static_cast<std::size_t>(len), 0.0) {}

    double& at(int c, int t) { return v[static_cast<std::size_t>(c) * length + t]; }
    double at(int c, int t) const { return v[static_cast<std::size_t>(c) * length + t]; }

    double* row(int c) { return v.data() + static_cast<std::size_t>(c) * length; }
    const double* row(int c) const { return v.data() + static_cast<std::size_t>(c) * length; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// Class index layout of the two-channel output map.
inline constexpr int kBackgroundChannel = 0;
inline constexpr int kPositiveChannel = 1;

}  // namespace renn
