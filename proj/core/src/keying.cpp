#include "poisonmark/keying.hpp"

#include <openssl/crypto.h>
#include <openssl/hmac.h>

#include <cmath>
#include <cstring>

#include <json.hpp>

namespace poisonmark {

using nlohmann::json;

namespace {

constexpr int kKeyFileVersion = 1;

std::array<std::uint8_t, 32> hmac_sha256(const std::uint8_t* key,
                                         std::size_t key_len,
                                         const std::uint8_t* msg,
                                         std::size_t msg_len) {
    std::array<std::uint8_t, 32> out{};
    unsigned int out_len = 0;
    if (HMAC(EVP_sha256(), key, static_cast<int>(key_len), msg, msg_len,
             out.data(), &out_len) == nullptr ||
        out_len != out.size()) {
        throw Error("HMAC-SHA256 computation failed");
    }
    return out;
}

std::vector<std::uint8_t> canonical_row_encoding(const std::string& sample_id,
                                                 std::span<const double> row) {
    std::vector<std::uint8_t> buf;
    buf.reserve(8 + sample_id.size() + row.size() * 8);
    const std::uint64_t id_len = sample_id.size();
    for (int i = 0; i < 8; ++i) {
        buf.push_back(static_cast<std::uint8_t>(id_len >> (8 * i)));
    }
    buf.insert(buf.end(), sample_id.begin(), sample_id.end());
    for (const double v : row) {
        if (std::isnan(v)) {
            throw NumericError("NaN in row, cannot compute canonical tag");
        }
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int i = 0; i < 8; ++i) {
            buf.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
        }
    }
    return buf;
}

}  // namespace

std::string key_mode_name(KeyMode m) {
    return m == KeyMode::identical ? "identical" : "concurrent";
}

KeyMode key_mode_from_name(const std::string& name) {
    if (name == "identical") return KeyMode::identical;
    if (name == "concurrent") return KeyMode::concurrent;
    throw FormatError("unknown key mode '" + name + "'");
}

void Key::validate() const {
    if (dim == 0 || entries.size() != dim) {
        throw ShapeError("key entries do not match dimension");
    }
    partition.validate();
    if (partition.dim != dim) {
        throw ShapeError("key partition dimension mismatch");
    }
    std::size_t w_cursor = 0;
    for (std::size_t j = 0; j < dim; ++j) {
        const bool on_w = w_cursor < partition.watermark_dims.size() &&
                          partition.watermark_dims[w_cursor] == j;
        if (on_w) ++w_cursor;
        const std::int8_t e = entries[j];
        if (mode == KeyMode::identical) {
            if (e != 1 && e != -1) {
                throw RangeError("identical key entry must be +-1");
            }
        } else {
            if (on_w ? (e != 1 && e != -1) : (e != 0)) {
                throw RangeError("concurrent key must be +-1 on W and 0 on P");
            }
        }
    }
}

Key sample_identical_key(std::size_t d, Seed128 seed) {
    if (d == 0) throw ArgumentError("invalid dimension d = 0");
    Key key;
    key.dim = d;
    key.mode = KeyMode::identical;
    key.seed = seed;
    key.partition = partition_from_dims(
        d, [&] {
            std::vector<std::size_t> all(d);
            for (std::size_t j = 0; j < d; ++j) all[j] = j;
            return all;
        }(),
        PartitionMode::post);
    key.entries.resize(d);
    Rng rng(seed);
    for (std::size_t j = 0; j < d; ++j) {
        key.entries[j] = static_cast<std::int8_t>(rng.sign());
    }
    return key;
}

Key sample_concurrent_key(const DimensionPartition& partition, Seed128 seed) {
    partition.validate();
    if (partition.mode != PartitionMode::concurrent) {
        throw ModeError("concurrent key requires a concurrent-mode partition");
    }
    Key key;
    key.dim = partition.dim;
    key.mode = KeyMode::concurrent;
    key.seed = seed;
    key.partition = partition;
    key.entries.assign(partition.dim, 0);
    Rng rng(seed);
    for (const std::size_t j : partition.watermark_dims) {
        key.entries[j] = static_cast<std::int8_t>(rng.sign());
    }
    return key;
}

Key sample_wise_key_stream(std::size_t d, Seed128 master_seed,
                           const std::string& sample_id) {
    std::uint8_t master_bytes[16];
    master_seed.to_bytes(master_bytes);
    const auto digest = hmac_sha256(
        master_bytes, sizeof(master_bytes),
        reinterpret_cast<const std::uint8_t*>(sample_id.data()),
        sample_id.size());
    return sample_identical_key(d, Seed128::from_bytes(digest.data()));
}

Key sample_wise_key_stream(const DimensionPartition& partition, KeyMode mode,
                           Seed128 master_seed, const std::string& sample_id) {
    std::uint8_t master_bytes[16];
    master_seed.to_bytes(master_bytes);
    const auto digest = hmac_sha256(
        master_bytes, sizeof(master_bytes),
        reinterpret_cast<const std::uint8_t*>(sample_id.data()),
        sample_id.size());
    const Seed128 sub = Seed128::from_bytes(digest.data());
    if (mode == KeyMode::concurrent) {
        return sample_concurrent_key(partition, sub);
    }
    Key key = sample_identical_key(partition.dim, sub);
    key.partition = partition;
    return key;
}

std::string AuthTag::tag_hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(64, '0');
    for (std::size_t i = 0; i < tag.size(); ++i) {
        out[2 * i] = digits[tag[i] >> 4];
        out[2 * i + 1] = digits[tag[i] & 0xF];
    }
    return out;
}

AuthTag AuthTag::from_hex(std::string sample_id, const std::string& hex) {
    if (hex.size() != 64) {
        throw FormatError("tag must be 64 hex digits (32 bytes), got " +
                          std::to_string(hex.size()));
    }
    AuthTag t;
    t.sample_id = std::move(sample_id);
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
        throw FormatError("invalid hex digit in tag");
    };
    for (std::size_t i = 0; i < 32; ++i) {
        t.tag[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) |
                                             nibble(hex[2 * i + 1]));
    }
    return t;
}

AuthTag compute_auth_tag(const AuthSecret& k_auth, const std::string& sample_id,
                         std::span<const double> row) {
    const auto buf = canonical_row_encoding(sample_id, row);
    AuthTag t;
    t.sample_id = sample_id;
    t.tag = hmac_sha256(k_auth.data(), k_auth.size(), buf.data(), buf.size());
    return t;
}

bool verify_auth_tag(const AuthSecret& k_auth, const std::string& sample_id,
                     std::span<const double> row, const AuthTag& tag) {
    const AuthTag fresh = compute_auth_tag(k_auth, sample_id, row);
    return CRYPTO_memcmp(fresh.tag.data(), tag.tag.data(), fresh.tag.size()) == 0;
}

namespace {

// Independent gen/auth material from one seed, domain-separated by label.
Seed128 derive_labeled_seed(Seed128 material, std::uint64_t epoch,
                            const char* label) {
    std::uint8_t material_bytes[16];
    material.to_bytes(material_bytes);
    std::string msg = std::string(label) + "/" + std::to_string(epoch);
    const auto digest =
        hmac_sha256(material_bytes, sizeof(material_bytes),
                    reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size());
    return Seed128::from_bytes(digest.data());
}

AuthSecret derive_auth_secret(Seed128 material, std::uint64_t epoch) {
    std::uint8_t material_bytes[16];
    material.to_bytes(material_bytes);
    std::string msg = "auth/" + std::to_string(epoch);
    AuthSecret out{};
    const auto digest =
        hmac_sha256(material_bytes, sizeof(material_bytes),
                    reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size());
    std::memcpy(out.data(), digest.data(), out.size());
    return out;
}

}  // namespace

KeyBundle make_bundle(Seed128 seed_material, std::int64_t created_at) {
    KeyBundle b;
    b.rotation_epoch = 0;
    b.gen_seed = derive_labeled_seed(seed_material, 0, "gen");
    b.k_auth = derive_auth_secret(seed_material, 0);
    b.created_at = created_at;
    return b;
}

KeyBundle rotate_bundle(const KeyBundle& old, Seed128 new_seed_material,
                        std::int64_t created_at) {
    KeyBundle b;
    b.rotation_epoch = old.rotation_epoch + 1;
    b.gen_seed = derive_labeled_seed(new_seed_material, b.rotation_epoch, "gen");
    b.k_auth = derive_auth_secret(new_seed_material, b.rotation_epoch);
    b.created_at = created_at;
    return b;
}

std::string key_to_json(const Key& key, bool store_entries) {
    key.validate();
    json j;
    j["version"] = kKeyFileVersion;
    j["mode"] = key_mode_name(key.mode);
    j["d"] = key.dim;
    j["q"] = key.q();
    j["watermark_dims"] = key.partition.watermark_dims;
    if (store_entries || !key.seed) {
        j["entries"] = std::vector<int>(key.entries.begin(), key.entries.end());
    } else {
        j["seed"] = key.seed->to_hex();
    }
    return j.dump(2) + "\n";
}

Key key_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("key file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != kKeyFileVersion) {
            throw FormatError("unsupported key file version " +
                              j.at("version").dump());
        }
        const KeyMode mode = key_mode_from_name(j.at("mode").get<std::string>());
        const std::size_t d = j.at("d").get<std::size_t>();
        auto dims = j.at("watermark_dims").get<std::vector<std::size_t>>();
        const std::size_t q = j.at("q").get<std::size_t>();
        if (dims.size() != q) {
            throw FormatError("key file q does not match watermark_dims length");
        }
        const bool has_seed = j.contains("seed");
        const bool has_entries = j.contains("entries");
        if (has_seed == has_entries) {
            throw FormatError("key file must contain exactly one of seed/entries");
        }
        const auto partition = partition_from_dims(
            d, dims,
            mode == KeyMode::concurrent ? PartitionMode::concurrent
                                        : PartitionMode::post);
        if (has_seed) {
            const Seed128 seed = Seed128::from_hex(j.at("seed").get<std::string>());
            if (mode == KeyMode::concurrent) {
                return sample_concurrent_key(partition, seed);
            }
            Key key = sample_identical_key(d, seed);
            key.partition = partition;
            return key;
        }
        Key key;
        key.dim = d;
        key.mode = mode;
        key.partition = partition;
        const auto ints = j.at("entries").get<std::vector<int>>();
        key.entries.assign(ints.begin(), ints.end());
        key.validate();
        return key;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed key file: ") + e.what());
    }
}

std::string tags_to_json(std::span<const AuthTag> tags) {
    json arr = json::array();
    for (const auto& t : tags) {
        arr.push_back({{"id", t.sample_id}, {"tag_hex", t.tag_hex()}});
    }
    return arr.dump(2) + "\n";
}

std::vector<AuthTag> tags_from_json(const std::string& json_text) {
    json arr;
    try {
        arr = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("tag sidecar is not valid JSON: ") + e.what());
    }
    if (!arr.is_array()) throw FormatError("tag sidecar must be a JSON array");
    std::vector<AuthTag> out;
    out.reserve(arr.size());
    try {
        for (const auto& item : arr) {
            out.push_back(AuthTag::from_hex(item.at("id").get<std::string>(),
                                            item.at("tag_hex").get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed tag sidecar: ") + e.what());
    }
    return out;
}

}  // namespace poisonmark
