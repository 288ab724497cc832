#pragma once

#include <array>
#include <cstdint>

namespace rwnn {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// A pure function of (counter, key): every draw can be addressed directly,
/// so simulation results do not depend on how paths are scheduled.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept;
};

/// Disjoint randomness namespaces. Changing a purpose never perturbs draws
/// made under another purpose.
enum class Purpose : std::uint32_t {
    increments = 1,
    reservoir = 2,
    connectivity = 3,
    volterra_oracle = 4,
    reference = 5,
};

/// Master seed from which every stream is derived.
struct SeedSpec {
    std::uint64_t master_seed = 0;

    /// Independent namespace, e.g. one per repeat or for reference runs.
    [[nodiscard]] SeedSpec derive(std::uint64_t tag) const noexcept;

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Sequential view over one addressed stream (purpose, stream id, substream).
/// Blocks are consumed in counter order, so the sequence is reproducible
/// from the address alone.
class RandomStream {
public:
    RandomStream(SeedSpec seeds, Purpose purpose, std::uint64_t stream, std::uint32_t substream) noexcept;

    /// Uniform on the open interval (0,1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal via Box-Muller; pairs are generated per block.
    double normal() noexcept;
    /// Uniform integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    std::uint64_t next_u64() noexcept;

    Philox4x32::Key key_{};
    Philox4x32::Counter counter_{};
    Philox4x32::Counter block_{};
    int word_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rwnn
