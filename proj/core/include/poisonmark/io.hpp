#pragma once

#include <map>
#include <string>
#include <vector>

#include "poisonmark/types.hpp"

namespace poisonmark {

// Sample ids (required for sample-wise detection) plus free-form provenance.
struct DatasetManifest {
    std::vector<std::string> ids;
    std::map<std::string, std::string> provenance;
};

// PMDS container: "PMDS" magic, u32 version, u64 n, u64 d, u64 flags
// (bit0 has_labels, bit1 clip-mode range guarantee), u64 manifest byte
// length, then n*d little-endian f64 payload, optional n little-endian i64
// labels, and a trailing JSON manifest. Loads are bit-identical to stores.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

// Atomic: writes a temp file in the target directory, then renames.
void store_dataset(const DataMatrix& m, const std::string& path,
                   const DatasetManifest& manifest = {},
                   ClipMode clip_mode = ClipMode::clip);
void store_dataset(const PerturbedMatrix& m, const std::string& path,
                   const DatasetManifest& manifest = {});

struct LoadedDataset {
    DataMatrix data;
    DatasetManifest manifest;
    ClipMode clip_mode = ClipMode::clip;
};

LoadedDataset load_dataset(const std::string& path);

// Headerless CSV of reals in [0,1]; expected_dim == 0 infers the width from
// the first row. Ragged rows and out-of-range values report line numbers.
DataMatrix import_csv(const std::string& path, std::size_t expected_dim = 0);

std::string read_text_file(const std::string& path);
void write_text_file_atomic(const std::string& path, const std::string& text);

}  // namespace poisonmark
