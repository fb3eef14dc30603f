#include "ctmar/core.hpp"

namespace ctmar {

std::uint64_t sample_poisson(Rng& rng, double mean, double normal_threshold) {
    if (!(mean >= 0.0)) throw numeric_error("poisson mean must be non-negative");
    if (mean == 0.0) return 0;
    if (mean <= normal_threshold) {
        // count exponential inter-arrival times until they pass the mean
        std::uint64_t k = 0;
        double t = 0.0;
        for (;;) {
            double u = rng.uniform();
            if (u < 1e-300) u = 1e-300;
            t -= std::log(u);
            if (t >= mean) break;
            ++k;
        }
        return k;
    }
    double draw = std::round(mean + std::sqrt(mean) * rng.normal());
    if (draw < 0.0) draw = 0.0;
    return static_cast<std::uint64_t>(draw);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t x) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[x & 0xf];
        x >>= 4;
    }
    return out;
}

}  // namespace ctmar
