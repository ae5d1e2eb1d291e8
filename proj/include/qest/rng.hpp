#ifndef QEST_RNG_HPP
#define QEST_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace qest {

// All stochastic code takes an explicit Rng handle. Draws are generated from
// raw engine words through fixed arithmetic, so a given seed produces the
// same stream on every platform and at every optimization level.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // uniform on [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller; consumes exactly two engine words
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // binomial draw as a sum of Bernoulli trials; n is small everywhere here
    int binomial(int n, double p) {
        int hits = 0;
        for (int i = 0; i < n; ++i)
            hits += uniform() < p ? 1 : 0;
        return hits;
    }

    std::size_t pick_index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::mt19937_64 engine_;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}
}  // namespace detail

// Counter-based substream derivation. Work items (episodes, fitness
// evaluations) get seeds from their index alone, so results do not depend on
// how items are scheduled across workers.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return detail::splitmix64(detail::splitmix64(master) ^ detail::splitmix64(stream));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
    return derive_seed(derive_seed(master, a, b), c);
}

}  // namespace qest

#endif
