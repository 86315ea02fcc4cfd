#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace cfmimo {

/// Purpose tags for deterministic stream derivation. Values are part of the
/// reproducibility contract; append only.
enum class StreamTag : std::uint64_t
{
    ApPositions = 1,
    AdvPositions = 2,
    UserPositions = 3,
    ShadowLegit = 4,
    ShadowAdv = 5,
    Trial = 6,
    Drop = 7,
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for the stream identified by (master seed, tag, index).
constexpr std::uint64_t stream_seed(std::uint64_t master, StreamTag tag, std::uint64_t index)
{
    return mix64(mix64(mix64(master) ^ static_cast<std::uint64_t>(tag)) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// One independent random stream. Draw order inside a stream is fixed by the
/// caller, so a stream reproduces bit-identically on any thread.
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t master, StreamTag tag, std::uint64_t index)
        : engine_(stream_seed(master, tag, index)) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double normal() { return normal_(engine_); }

    /// CN(0, 1): real and imaginary parts i.i.d. N(0, 1/2).
    std::complex<double> complex_normal()
    {
        constexpr double s = 0.70710678118654752440;
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {s * re, s * im};
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace cfmimo
