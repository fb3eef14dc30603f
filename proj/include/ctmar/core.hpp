#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctmar {

// Exit-code mapping used by the CLI: validation -> 2, io -> 3, numeric -> 4.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major 2-D array.
template <typename T>
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Grid() = default;
    Grid(int r, int c, T fill = T{}) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    T& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    T* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const T* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return v.size(); }
    template <typename U>
    bool same_shape(const Grid<U>& o) const {
        return rows == o.rows && cols == o.cols;
    }
    bool operator==(const Grid& o) const { return rows == o.rows && cols == o.cols && v == o.v; }
};

using GridF = Grid<float>;
using GridB = Grid<std::uint8_t>;

// --- seeded RNG -------------------------------------------------------------
//
// splitmix64 steps; all sampling goes through this so results are reproducible
// across platforms and independent of std:: distribution internals.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixes a stream index into a seed; used to derive independent per-scene /
// per-bin / per-patch streams from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + (index << 1));
    splitmix64(s);
    return splitmix64(s);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // burn-in so small seeds decorrelate
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi] inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // standard normal, Box-Muller
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    std::uint64_t state_;
};

// Poisson sample: exponential-arrival counting below the threshold mean
// (exact, O(mean)), rounded normal approximation above it.
std::uint64_t sample_poisson(Rng& rng, double mean, double normal_threshold);

// FNV-1a over a byte string; used for geometry hashes in container headers.
std::uint64_t fnv1a64(const std::string& s);

std::string to_hex(std::uint64_t x);

}  // namespace ctmar
