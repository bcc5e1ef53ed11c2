#ifndef ETAD_STATS_HPP
#define ETAD_STATS_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace etad {

// Weighted first and second moments; sigma is the population value.
struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
    double weight = 0.0;
};

Moments weighted_moments(std::span<const double> values, std::span<const double> weights);

// Quartiles by linear interpolation between closest ranks.
struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

Quartiles quartiles(std::vector<double> values);

// Half the L1 distance between two finite distributions; shorter vector is
// implicitly zero-padded.
double total_variation(std::span<const double> a, std::span<const double> b);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

double kahan_sum(std::span<const double> values);

} // namespace etad

#endif
