#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "poisonmark/io.hpp"
#include "poisonmark/rng.hpp"

using namespace poisonmark;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("poisonmark-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
    static inline int counter = 0;
};

DataMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed,
                         bool labels) {
    Rng rng(Seed128{seed, 0});
    std::vector<double> values(n * d);
    for (auto& v : values) v = rng.next_unit();
    std::optional<std::vector<std::int64_t>> lbl;
    if (labels) {
        lbl.emplace(n);
        for (auto& y : *lbl) y = rng.sign();
    }
    return DataMatrix::unchecked(n, d, std::move(values), std::move(lbl));
}

}  // namespace

TEST_CASE("dataset round trip is bit identical") {
    TempDir dir;
    const auto m = random_matrix(100, 64, 7, true);
    DatasetManifest manifest;
    for (std::size_t i = 0; i < 100; ++i) {
        manifest.ids.push_back("s" + std::to_string(i));
    }
    manifest.provenance["source"] = "unit-test";
    const std::string path = dir.file("a.pmds");
    store_dataset(m, path, manifest);

    const auto loaded = load_dataset(path);
    CHECK(loaded.data.values() == m.values());
    CHECK(loaded.data.labels() == m.labels());
    CHECK(loaded.manifest.ids == manifest.ids);
    CHECK(loaded.manifest.provenance.at("source") == "unit-test");
    CHECK(loaded.clip_mode == ClipMode::clip);

    // Store the loaded copy: identical bytes.
    const std::string path2 = dir.file("b.pmds");
    store_dataset(loaded.data, path2, loaded.manifest, loaded.clip_mode);
    CHECK(read_text_file(path) == read_text_file(path2));
}

TEST_CASE("labels and manifest are optional") {
    TempDir dir;
    const auto m = random_matrix(5, 3, 9, false);
    const std::string path = dir.file("plain.pmds");
    store_dataset(m, path);
    const auto loaded = load_dataset(path);
    CHECK_FALSE(loaded.data.has_labels());
    CHECK(loaded.manifest.ids.empty());
}

TEST_CASE("version and magic are validated") {
    TempDir dir;
    const auto m = random_matrix(4, 4, 11, false);
    const std::string path = dir.file("v.pmds");
    store_dataset(m, path);

    std::string bytes = read_text_file(path);
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        write_text_file_atomic(path, bytes);
        CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("magic"),
                             FormatError);
    }
    SUBCASE("future version") {
        bytes[4] = 99;
        write_text_file_atomic(path, bytes);
        CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("version"),
                             FormatError);
    }
    SUBCASE("truncated payload never yields partial data") {
        write_text_file_atomic(path, bytes.substr(0, bytes.size() - 9));
        CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("truncated"),
                             FormatError);
    }
}

TEST_CASE("strict-mode files skip the range check") {
    // Data stored under strict mode may legitimately sit outside [0,1]
    // only via the clip flag; the loader only range-validates clip files.
    TempDir dir;
    const auto m = random_matrix(2, 2, 13, false);
    const std::string path = dir.file("s.pmds");
    store_dataset(m, path, {}, ClipMode::strict);
    const auto loaded = load_dataset(path);
    CHECK(loaded.clip_mode == ClipMode::strict);
}

TEST_CASE("store refuses to clobber a directory and keeps the original") {
    TempDir dir;
    const auto m = random_matrix(2, 2, 15, false);
    const std::string path = dir.file("keep.pmds");
    store_dataset(m, path);

    fs::create_directories(dir.file("adir"));
    CHECK_THROWS(store_dataset(m, dir.file("adir")));
    // Original target still loads after an unrelated failed store.
    CHECK_NOTHROW(load_dataset(path));
    // No stray temp files left behind.
    std::size_t entries = 0;
    for (const auto& e : fs::directory_iterator(dir.path)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 2);  // keep.pmds and adir
}

TEST_CASE("csv import") {
    TempDir dir;
    const std::string path = dir.file("m.csv");

    SUBCASE("2x2 values") {
        std::ofstream(path) << "0.1,0.2\n0.3,0.4\n";
        const auto m = import_csv(path, 2);
        CHECK(m.n_samples() == 2);
        CHECK(m.dim() == 2);
        CHECK(m.row(1)[1] == doctest::Approx(0.4));
    }
    SUBCASE("width can be inferred") {
        std::ofstream(path) << "0.1,0.2,0.3\n0.4,0.5,0.6\n";
        CHECK(import_csv(path).dim() == 3);
    }
    SUBCASE("ragged rows carry the line number") {
        std::ofstream(path) << "0.1,0.2\n0.3\n";
        CHECK_THROWS_WITH_AS(import_csv(path, 2), doctest::Contains(":2"),
                             FormatError);
    }
    SUBCASE("out-of-range values carry the line number") {
        std::ofstream(path) << "0.1,0.2\n0.3,1.5\n";
        CHECK_THROWS_WITH_AS(import_csv(path, 2), doctest::Contains(":2"),
                             RangeError);
    }
    SUBCASE("garbage cells are format errors") {
        std::ofstream(path) << "0.1,apple\n";
        CHECK_THROWS_AS(import_csv(path, 2), FormatError);
    }
    SUBCASE("empty files are rejected") {
        std::ofstream(path) << "";
        CHECK_THROWS_AS(import_csv(path, 2), FormatError);
    }
}
