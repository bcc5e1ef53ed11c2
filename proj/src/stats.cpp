#include "etad/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace etad {

Moments weighted_moments(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size())
        throw std::invalid_argument("weighted_moments: size mismatch");
    double w = 0.0, mean = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        w += weights[i];
        mean += weights[i] * values[i];
    }
    if (w <= 0.0) throw std::invalid_argument("weighted_moments: zero total weight");
    mean /= w;
    double var = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        double d = values[i] - mean;
        var += weights[i] * d * d;
    }
    return {mean, std::sqrt(var / w), w};
}

static double rank_interpolate(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quartiles: empty input");
    if (sorted.size() == 1) return sorted[0];
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

Quartiles quartiles(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {rank_interpolate(values, 0.25), rank_interpolate(values, 0.5),
            rank_interpolate(values, 0.75)};
}

double total_variation(std::span<const double> a, std::span<const double> b) {
    size_t m = std::max(a.size(), b.size());
    double acc = 0.0;
    for (size_t i = 0; i < m; ++i) {
        double av = i < a.size() ? a[i] : 0.0;
        double bv = i < b.size() ? b[i] : 0.0;
        acc += std::fabs(av - bv);
    }
    return 0.5 * acc;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        double fa = static_cast<double>(i) / static_cast<double>(a.size());
        double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::fabs(fa - fb));
    }
    return d;
}

double kahan_sum(std::span<const double> values) {
    double sum = 0.0, c = 0.0;
    for (double v : values) {
        double y = v - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    return sum;
}

} // namespace etad
