#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace rankstab {

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0; // sample standard deviation (n - 1), 0 for n < 2
    std::size_t n = 0;
};

inline MeanSd mean_sd(std::span<const double> xs) {
    MeanSd out;
    out.n = xs.size();
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return out;
}

inline double mean_of(std::span<const double> xs) { return mean_sd(xs).mean; }

} // namespace rankstab
