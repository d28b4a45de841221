#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace ecoattn {

/// Deterministic random source.
///
/// The core generator is std::mt19937_64, whose output sequence is fixed by
/// the C++ standard.  The uniform and normal transforms are coded here
/// explicitly (53-bit mantissa scaling and Box-Muller) instead of going
/// through std::uniform_real_distribution / std::normal_distribution, whose
/// draw sequences are implementation-defined.  A given seed therefore yields
/// the same stream on every platform.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Identifier of the generator + transform stack, for provenance fields.
    static const char* algorithm() { return "mt19937_64/u53/box-muller"; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1): top 53 bits of the engine output scaled by 2^-53.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound); bound must be positive.
    std::size_t next_index(std::size_t bound);

    /// Standard normal via Box-Muller.  Always consumes exactly two uniform
    /// draws and discards the sine branch, so the stream position after a
    /// call never depends on caching state.
    double next_normal();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace ecoattn
