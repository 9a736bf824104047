#include "poisonmark/rng.hpp"

#include <cmath>
#include <cstring>

#include "poisonmark/error.hpp"

namespace poisonmark {

std::string Seed128::to_hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(32, '0');
    std::uint64_t words[2] = {hi, lo};
    for (int w = 0; w < 2; ++w) {
        for (int i = 0; i < 16; ++i) {
            out[w * 16 + i] =
                digits[(words[w] >> (60 - 4 * i)) & 0xF];
        }
    }
    return out;
}

Seed128 Seed128::from_hex(const std::string& hex) {
    if (hex.size() != 32) {
        throw FormatError("seed must be 32 hex digits, got " +
                          std::to_string(hex.size()));
    }
    auto nibble = [](char c) -> std::uint64_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint64_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint64_t>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<std::uint64_t>(c - 'A' + 10);
        throw FormatError(std::string("invalid hex digit '") + c + "' in seed");
    };
    Seed128 s;
    for (int i = 0; i < 16; ++i) s.hi = (s.hi << 4) | nibble(hex[i]);
    for (int i = 16; i < 32; ++i) s.lo = (s.lo << 4) | nibble(hex[i]);
    return s;
}

Seed128 Seed128::from_bytes(const std::uint8_t* b) {
    Seed128 s;
    for (int i = 0; i < 8; ++i) s.hi = (s.hi << 8) | b[i];
    for (int i = 8; i < 16; ++i) s.lo = (s.lo << 8) | b[i];
    return s;
}

void Seed128::to_bytes(std::uint8_t* b) const {
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
    for (int i = 0; i < 8; ++i) b[8 + i] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
}

namespace {

constexpr std::uint64_t kParity = 0x1BD11BDADA22EA87ULL;
// Threefry-2x64 rotation schedule.
constexpr unsigned kRot[8] = {16, 42, 12, 31, 16, 32, 24, 21};

inline std::uint64_t rotl(std::uint64_t x, unsigned r) {
    return (x << r) | (x >> (64 - r));
}

}  // namespace

std::array<std::uint64_t, 2> threefry2x64(const Seed128& key,
                                          std::uint64_t counter_hi,
                                          std::uint64_t counter_lo) {
    const std::uint64_t ks[3] = {key.hi, key.lo, key.hi ^ key.lo ^ kParity};
    std::uint64_t x0 = counter_hi + ks[0];
    std::uint64_t x1 = counter_lo + ks[1];
    for (unsigned round = 0; round < 20; ++round) {
        x0 += x1;
        x1 = rotl(x1, kRot[round % 8]) ^ x0;
        if (round % 4 == 3) {
            const unsigned s = round / 4 + 1;
            x0 += ks[s % 3];
            x1 += ks[(s + 1) % 3] + s;
        }
    }
    return {x0, x1};
}

std::uint64_t Rng::next_u64() {
    if (have_buffered_) {
        have_buffered_ = false;
        return buffer_;
    }
    const auto block = threefry2x64(seed_, stream_, counter_++);
    buffer_ = block[1];
    have_buffered_ = true;
    return block[0];
}

double Rng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
}

int Rng::sign() {
    return (next_u64() & 1) ? 1 : -1;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ArgumentError("Rng::below requires n > 0");
    // Rejection sampling on the top range, unbiased.
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1;
    do {
        u1 = next_unit();
    } while (u1 <= 0.0);
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

Seed128 Rng::derive(std::uint64_t id) const {
    // Distinct tag keeps derived seeds off this stream's counter space.
    const auto block = threefry2x64(
        Seed128{seed_.hi ^ 0x9E3779B97F4A7C15ULL, seed_.lo}, stream_, id);
    return Seed128{block[0], block[1]};
}

}  // namespace poisonmark
