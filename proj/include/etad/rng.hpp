#ifndef ETAD_RNG_HPP
#define ETAD_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace etad {

// Deterministic random source. All draws go through our own mappings so a
// seed produces the same stream on any standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next() { return eng_(); }

    // Unbiased integer in [0, bound).
    uint64_t below(uint64_t bound) {
        const uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = eng_();
            if (r >= threshold) return r % bound;
        }
    }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; two draws per call, no cached spare.
    double normal() {
        double u1 = 1.0 - unit();
        double u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Log-normal parameterized by its median and log-space shape.
    double lognormal(double median, double sigma) {
        return median * std::exp(sigma * normal());
    }

    // `count` distinct values from [0, bound), in draw order.
    std::vector<uint32_t> distinct(uint32_t bound, uint32_t count) {
        std::vector<uint32_t> out;
        out.reserve(count);
        while (out.size() < count) {
            auto v = static_cast<uint32_t>(below(bound));
            bool dup = false;
            for (uint32_t seen : out)
                if (seen == v) { dup = true; break; }
            if (!dup) out.push_back(v);
        }
        return out;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace etad

#endif
