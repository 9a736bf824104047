#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisonmark/partition.hpp"
#include "poisonmark/rng.hpp"
#include "poisonmark/types.hpp"

namespace poisonmark {

enum class KeyMode { identical, concurrent };

std::string key_mode_name(KeyMode m);
KeyMode key_mode_from_name(const std::string& name);

// Detection key: entries in {-1, 0, +1}. Identical mode has +-1 everywhere;
// concurrent mode has +-1 on W and exact zeros on P. Reproducible from
// (seed, partition, mode) when the seed is kept.
struct Key {
    std::size_t dim = 0;
    std::vector<std::int8_t> entries;
    KeyMode mode = KeyMode::identical;
    DimensionPartition partition;
    std::optional<Seed128> seed;

    std::size_t q() const { return partition.q(); }
    void validate() const;
};

// Each entry i.i.d. uniform on {-1, +1}; partition is the full [d].
Key sample_identical_key(std::size_t d, Seed128 seed);

// +-1 uniform on W, exactly 0 on P. Requires a concurrent-mode partition.
Key sample_concurrent_key(const DimensionPartition& partition, Seed128 seed);

// Per-sample key for sample-wise schemes: the 128-bit sub-seed is
// HMAC-SHA256(master_seed, sample_id) truncated to 16 bytes, so distinct ids
// give statistically independent keys and storage stays O(1).
Key sample_wise_key_stream(std::size_t d, Seed128 master_seed,
                           const std::string& sample_id);
Key sample_wise_key_stream(const DimensionPartition& partition, KeyMode mode,
                           Seed128 master_seed, const std::string& sample_id);

// HMAC-SHA256 tag over one dataset row.
struct AuthTag {
    std::string sample_id;
    std::array<std::uint8_t, 32> tag{};
    static constexpr const char* kAlgorithm = "HMAC-SHA256";

    std::string tag_hex() const;
    static AuthTag from_hex(std::string sample_id, const std::string& hex);
};

using AuthSecret = std::array<std::uint8_t, 32>;

// Tag over the canonical encoding: u64-LE byte length of the UTF-8 id,
// the id bytes, then the row as little-endian 64-bit floats. NaN is refused.
AuthTag compute_auth_tag(const AuthSecret& k_auth, const std::string& sample_id,
                         std::span<const double> row);

// Constant-time comparison of the recomputed tag against the stored one.
bool verify_auth_tag(const AuthSecret& k_auth, const std::string& sample_id,
                     std::span<const double> row, const AuthTag& tag);

// Generation + authentication key material with monotone rotation epochs.
struct KeyBundle {
    Seed128 gen_seed;
    AuthSecret k_auth{};
    std::uint64_t rotation_epoch = 0;
    std::int64_t created_at = 0;  // unix seconds; 0 under --deterministic
};

KeyBundle make_bundle(Seed128 seed_material, std::int64_t created_at = 0);
KeyBundle rotate_bundle(const KeyBundle& old, Seed128 new_seed_material,
                        std::int64_t created_at = 0);

// Key file JSON: {version, mode, d, q, watermark_dims, seed? | entries?}.
// Exactly one of seed/entries is present.
std::string key_to_json(const Key& key, bool store_entries);
Key key_from_json(const std::string& json_text);

// Tag sidecar JSON: array of {"id": ..., "tag_hex": ...}.
std::string tags_to_json(std::span<const AuthTag> tags);
std::vector<AuthTag> tags_from_json(const std::string& json_text);

}  // namespace poisonmark
