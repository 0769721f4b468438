#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sskp {

// splitmix64 step; used to derive independent child seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic child seed for (seed, stream). All randomness in the pipeline
// flows from one root seed through this scheme.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (0xD1B54A32D192ED03ull * (stream + 1));
    std::uint64_t out = splitmix64(state);
    return splitmix64(state) ^ out;
}

// Pipeline stage stream ids. stage_seed(root, stage) seeds each stage.
enum class Stage : std::uint64_t {
    Demos = 1,
    Skills = 2,
    Risk = 3,
    Online = 4,
    Diagnose = 5,
};

inline std::uint64_t stage_seed(std::uint64_t root, Stage stage) {
    return mix_seed(root, static_cast<std::uint64_t>(stage));
}

// Seeded random stream. Normal variates use Box-Muller on top of mt19937_64 so
// the sequence is identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Independent stream derived from this rng's seed and a caller-chosen id.
    // Split is a function of the construction seed, not of the draw position.
    Rng split(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Eigen::VectorXd normal_vector(int n) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

    Eigen::MatrixXd normal_matrix(int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r) m(r, c) = normal();
        return m;
    }

    // Unbiased integer in [0, n); rejection sampling keeps the stream portable.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= bound) x = next_u64();
        return static_cast<std::size_t>(x % n);
    }

    // Fisher-Yates; hand-rolled since std::shuffle is implementation-defined.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace sskp
