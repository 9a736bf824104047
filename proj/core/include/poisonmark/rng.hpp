#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace poisonmark {

// 128-bit seed, the unit of key material across the toolkit. Serialized as
// 32 lowercase hex digits, high word first.
struct Seed128 {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    friend bool operator==(const Seed128&, const Seed128&) = default;

    std::string to_hex() const;
    static Seed128 from_hex(const std::string& hex);
    static Seed128 from_bytes(const std::uint8_t* bytes16);
    void to_bytes(std::uint8_t* bytes16) const;
};

// Threefry-2x64, 20 rounds. One 128-bit block per (key, counter) pair.
std::array<std::uint64_t, 2> threefry2x64(const Seed128& key,
                                          std::uint64_t counter_hi,
                                          std::uint64_t counter_lo);

// Counter-based deterministic generator. The mapping from
// (seed, stream, draw index) to output is part of the key-file contract
// (format version "threefry2x64-20/v1") and must not change across releases.
//
// Streams are independent: Rng(seed, 0) and Rng(seed, 1) never share blocks.
// `derive` splits off a new 128-bit seed so derived generators are
// statistically independent of the parent stream.
class Rng {
public:
    static constexpr const char* kAlgorithm = "threefry2x64-20/v1";

    explicit Rng(Seed128 seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64();

    // Uniform on [0,1), 53-bit resolution.
    double next_unit();

    // Uniform on [lo, hi).
    double uniform(double lo, double hi);

    // +1 or -1 with probability 1/2 each.
    int sign();

    // Unbiased uniform integer in [0, n). n must be nonzero.
    std::uint64_t below(std::uint64_t n);

    // Standard normal via Box-Muller (two uniforms per pair, one cached).
    double normal();

    // New seed derived from (seed, stream, id); independent of this stream.
    Seed128 derive(std::uint64_t id) const;

    Seed128 seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    Seed128 seed_;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t buffer_ = 0;
    bool have_buffered_ = false;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace poisonmark
