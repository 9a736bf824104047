#include "poisonmark/io.hpp"

#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace poisonmark {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'M', 'D', 'S'};
constexpr std::uint64_t kFlagHasLabels = 1ull << 0;
constexpr std::uint64_t kFlagClipRange = 1ull << 1;

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

void append_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    append_u64(buf, bits);
}

class Reader {
public:
    Reader(const std::string& data, const std::string& path)
        : data_(data), path_(path) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
        }
        pos_ += 8;
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) {
            throw FormatError("truncated dataset file " + path_);
        }
    }

    const std::string& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string manifest_to_json(const DatasetManifest& manifest) {
    json j;
    j["ids"] = manifest.ids;
    j["provenance"] = manifest.provenance;
    return j.dump();
}

DatasetManifest manifest_from_json(const std::string& text,
                                   const std::string& path) {
    try {
        const json j = json::parse(text);
        DatasetManifest m;
        m.ids = j.value("ids", std::vector<std::string>{});
        if (j.contains("provenance")) {
            for (const auto& [k, v] : j.at("provenance").items()) {
                m.provenance[k] = v.get<std::string>();
            }
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError("malformed manifest in " + path + ": " + e.what());
    }
}

void write_raw_atomic(const std::string& path, const std::string& bytes) {
    const fs::path target(path);
    const fs::path dir = target.parent_path().empty() ? fs::path(".")
                                                      : target.parent_path();
    std::error_code ec;
    if (fs::is_directory(target, ec)) {
        throw Error("cannot store to " + path + ": target is a directory");
    }
    const fs::path tmp =
        dir / (target.filename().string() + ".tmp." +
               std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing: " +
                        std::strerror(errno));
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code rm;
            fs::remove(tmp, rm);
            throw Error("write failed for " + tmp.string() + ": " +
                        std::strerror(errno));
        }
    }
    std::error_code rename_ec;
    fs::rename(tmp, target, rename_ec);
    if (rename_ec) {
        std::error_code rm;
        fs::remove(tmp, rm);
        throw Error("cannot move temp file into place at " + path + ": " +
                    rename_ec.message());
    }
}

}  // namespace

void store_dataset(const DataMatrix& m, const std::string& path,
                   const DatasetManifest& manifest, ClipMode clip_mode) {
    if (!manifest.ids.empty() && manifest.ids.size() != m.n_samples()) {
        throw ArgumentError("manifest has " + std::to_string(manifest.ids.size()) +
                            " ids for " + std::to_string(m.n_samples()) +
                            " rows");
    }
    for (const double v : m.values()) {
        if (!std::isfinite(v)) {
            throw NumericError("refusing to store non-finite value");
        }
    }
    const std::string manifest_text = manifest_to_json(manifest);
    std::string buf;
    buf.reserve(36 + m.values().size() * 8 +
                (m.has_labels() ? m.n_samples() * 8 : 0) + manifest_text.size());
    buf.append(kMagic, 4);
    append_u32(buf, kDatasetFormatVersion);
    append_u64(buf, m.n_samples());
    append_u64(buf, m.dim());
    std::uint64_t flags = 0;
    if (m.has_labels()) flags |= kFlagHasLabels;
    if (clip_mode == ClipMode::clip) flags |= kFlagClipRange;
    append_u64(buf, flags);
    append_u64(buf, manifest_text.size());
    for (const double v : m.values()) append_f64(buf, v);
    if (m.has_labels()) {
        for (const std::int64_t label : m.labels()) {
            append_u64(buf, static_cast<std::uint64_t>(label));
        }
    }
    buf.append(manifest_text);
    write_raw_atomic(path, buf);
}

void store_dataset(const PerturbedMatrix& m, const std::string& path,
                   const DatasetManifest& manifest) {
    store_dataset(m.materialize(), path, manifest, m.clip_mode());
}

LoadedDataset load_dataset(const std::string& path) {
    const std::string data = read_text_file(path);
    Reader r(data, path);
    const std::string magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw FormatError(path + " is not a PMDS dataset (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kDatasetFormatVersion) {
        throw FormatError(path + " has unsupported format version " +
                          std::to_string(version));
    }
    const std::uint64_t n = r.u64();
    const std::uint64_t d = r.u64();
    const std::uint64_t flags = r.u64();
    const std::uint64_t manifest_len = r.u64();
    if (n == 0 || d == 0) {
        throw FormatError(path + " declares an empty matrix");
    }
    const bool has_labels = flags & kFlagHasLabels;
    const bool clip_range = flags & kFlagClipRange;
    const std::uint64_t expect = n * d * 8 + (has_labels ? n * 8 : 0) +
                                 manifest_len;
    if (r.remaining() != expect) {
        throw FormatError("truncated dataset file " + path + ": payload has " +
                          std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(expect));
    }

    std::vector<double> values(n * d);
    for (auto& v : values) {
        v = r.f64();
        if (!std::isfinite(v)) {
            throw NumericError(path + " contains a non-finite value");
        }
        if (clip_range && (v < 0.0 || v > 1.0)) {
            throw RangeError(path + " declares clipped data but has value " +
                             std::to_string(v));
        }
    }
    std::optional<std::vector<std::int64_t>> labels;
    if (has_labels) {
        labels.emplace(n);
        for (auto& label : *labels) {
            label = static_cast<std::int64_t>(r.u64());
        }
    }
    LoadedDataset out;
    out.clip_mode = clip_range ? ClipMode::clip : ClipMode::strict;
    out.manifest = manifest_from_json(r.bytes(manifest_len), path);
    if (!out.manifest.ids.empty() && out.manifest.ids.size() != n) {
        throw FormatError(path + " manifest id count does not match rows");
    }
    out.data = DataMatrix::unchecked(n, d, std::move(values), std::move(labels));
    return out;
}

DataMatrix import_csv(const std::string& path, std::size_t expected_dim) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path + ": " + std::strerror(errno));
    }
    std::vector<double> values;
    std::size_t dim = expected_dim;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t count = 0;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            ++count;
            std::size_t consumed = 0;
            double v;
            try {
                v = std::stod(cell, &consumed);
            } catch (const std::exception&) {
                throw FormatError(path + ":" + std::to_string(line_no) +
                                  ": cannot parse '" + cell + "' as a number");
            }
            while (consumed < cell.size() &&
                   std::isspace(static_cast<unsigned char>(cell[consumed]))) {
                ++consumed;
            }
            if (consumed != cell.size()) {
                throw FormatError(path + ":" + std::to_string(line_no) +
                                  ": trailing characters in '" + cell + "'");
            }
            if (!std::isfinite(v)) {
                throw NumericError(path + ":" + std::to_string(line_no) +
                                   ": non-finite value");
            }
            if (v < 0.0 || v > 1.0) {
                throw RangeError(path + ":" + std::to_string(line_no) +
                                 ": value " + std::to_string(v) +
                                 " outside [0,1]");
            }
            values.push_back(v);
        }
        if (dim == 0) dim = count;
        if (count != dim) {
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": ragged row with " + std::to_string(count) +
                              " columns, expected " + std::to_string(dim));
        }
        ++rows;
    }
    if (rows == 0) throw FormatError(path + " contains no data rows");
    return DataMatrix::unchecked(rows, dim, std::move(values));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path + ": " + std::strerror(errno));
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file_atomic(const std::string& path, const std::string& text) {
    write_raw_atomic(path, text);
}

}  // namespace poisonmark
