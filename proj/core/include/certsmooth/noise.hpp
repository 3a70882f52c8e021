#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace certsmooth {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept;
};

/// Purpose of a batch of draws; each stage gets an independent stream.
enum class Stage : std::uint32_t { Selection = 0, Estimation = 1, Calibration = 2 };

/// Mixes a seed with an index into a new, well-spread seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Standard normal vectors addressed by (seed, stage, stream, index). The value
/// for a given address never depends on which other addresses were generated
/// or in what order, which makes parallel sampling reproducible.
class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, Stage stage, std::uint32_t stream = 0) noexcept;

    /// Writes out.size() i.i.d. N(0, 1) variates for draw `index`.
    void fill(std::uint64_t index, std::span<double> out) const noexcept;

private:
    Philox4x32::Key key_;
    std::uint32_t stream_;
};

} // namespace certsmooth
