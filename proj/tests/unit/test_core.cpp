#include <doctest.h>

#include <cmath>
#include <limits>

#include "poisonmark/partition.hpp"
#include "poisonmark/types.hpp"

using namespace poisonmark;

TEST_CASE("full-dimension partitions") {
    const Seed128 seed{1, 1};
    const auto post = make_partition(4, 4, seed, PartitionMode::post);
    CHECK(post.watermark_dims == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(post.poison_dims == std::vector<std::size_t>{0, 1, 2, 3});

    const auto conc = make_partition(4, 4, seed, PartitionMode::concurrent);
    CHECK(conc.watermark_dims == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(conc.poison_dims.empty());
}

TEST_CASE("partition determinism") {
    const Seed128 seed{0xABCD, 42};
    const auto a = make_partition(3072, 1000, seed, PartitionMode::post);
    const auto b = make_partition(3072, 1000, seed, PartitionMode::post);
    CHECK(a.watermark_dims == b.watermark_dims);
    CHECK(a.watermark_dims.size() == 1000);
    // A different seed almost surely picks a different subset.
    const auto c = make_partition(3072, 1000, Seed128{0xABCD, 43},
                                  PartitionMode::post);
    CHECK(a.watermark_dims != c.watermark_dims);
}

TEST_CASE("partition W and P are consistent in concurrent mode") {
    const auto p = make_partition(64, 17, Seed128{5, 5},
                                  PartitionMode::concurrent);
    CHECK(p.watermark_dims.size() == 17);
    CHECK(p.poison_dims.size() == 47);
    for (std::size_t i = 0; i + 1 < p.watermark_dims.size(); ++i) {
        CHECK(p.watermark_dims[i] < p.watermark_dims[i + 1]);
    }
    std::vector<bool> seen(64, false);
    for (const auto j : p.watermark_dims) seen[j] = true;
    for (const auto j : p.poison_dims) {
        CHECK(!seen[j]);
        seen[j] = true;
    }
    for (const bool s : seen) CHECK(s);
}

TEST_CASE("partition uniformity over 10000 seeds") {
    // d=16, q=4: each index lands in W with frequency 1/4 within 3 sigma of
    // the binomial standard error.
    const std::size_t trials = 10000;
    std::size_t counts[16] = {0};
    for (std::size_t t = 0; t < trials; ++t) {
        const auto p = make_partition(16, 4, Seed128{0x11, t},
                                      PartitionMode::post);
        for (const auto j : p.watermark_dims) counts[j]++;
    }
    const double expect = 0.25;
    const double sigma = std::sqrt(expect * (1 - expect) / trials);
    for (const auto c : counts) {
        const double freq = static_cast<double>(c) / trials;
        CHECK(std::abs(freq - expect) < 3.0 * sigma);
    }
}

TEST_CASE("partition length errors") {
    CHECK_THROWS_AS(make_partition(4, 5, Seed128{}, PartitionMode::post),
                    ArgumentError);
    CHECK_THROWS_AS(make_partition(4, 0, Seed128{}, PartitionMode::post),
                    ArgumentError);
}

TEST_CASE("validate_matrix accepts in-range data") {
    const auto m = validate_matrix(2, 2, {0.0, 1.0, 0.5, 0.25});
    CHECK(m.n_samples() == 2);
    CHECK(m.dim() == 2);
    CHECK(m.row(1)[0] == 0.5);
}

TEST_CASE("validate_matrix reports the offending position") {
    CHECK_THROWS_WITH_AS(validate_matrix(2, 2, {0.0, 1.0, 1.0001, 0.25}),
                         doctest::Contains("row 1"), RangeError);
    CHECK_THROWS_AS(
        validate_matrix(1, 2, {0.1, std::numeric_limits<double>::quiet_NaN()}),
        NumericError);
    CHECK_THROWS_AS(
        validate_matrix(1, 2, {0.1, std::numeric_limits<double>::infinity()}),
        NumericError);
    CHECK_THROWS_AS(validate_matrix(2, 2, {0.1, 0.2, 0.3}), ShapeError);
    CHECK_THROWS_AS(validate_matrix(0, 2, {}), ArgumentError);
}

TEST_CASE("labels must match the sample count") {
    CHECK_THROWS_AS(
        validate_matrix(2, 1, {0.1, 0.2}, std::vector<std::int64_t>{1}),
        ShapeError);
    const auto m =
        validate_matrix(2, 1, {0.1, 0.2}, std::vector<std::int64_t>{1, -1});
    CHECK(m.has_labels());
    CHECK(m.labels()[1] == -1);
}

TEST_CASE("budget validation") {
    CHECK_NOTHROW((BudgetConfig{0.1, 0.0, 0.05}).validate());
    CHECK_THROWS_AS((BudgetConfig{0.0, 0.0, 0.05}).validate(), ArgumentError);
    CHECK_THROWS_AS((BudgetConfig{0.1, -0.1, 0.05}).validate(), ArgumentError);
    CHECK_THROWS_AS((BudgetConfig{0.1, 0.0, 0.5}).validate(), ArgumentError);
}

TEST_CASE("perturbed matrix invariants") {
    const auto base = validate_matrix(2, 2, {0.5, 0.5, 0.9, 0.1});
    SUBCASE("strict mode rejects a clipped fraction") {
        CHECK_THROWS_AS(
            PerturbedMatrix(base, {0, 0, 0, 0}, ClipMode::strict, 0.1),
            ArgumentError);
    }
    SUBCASE("rows materialize base + delta") {
        PerturbedMatrix pm(base, {0.1, -0.1, 0.05, 0.0}, ClipMode::strict, 0.0);
        CHECK(pm.row(0)[0] == doctest::Approx(0.6));
        CHECK(pm.row(0)[1] == doctest::Approx(0.4));
        const auto m = pm.materialize();
        CHECK(m.values()[2] == doctest::Approx(0.95));
    }
    SUBCASE("delta shape is enforced") {
        CHECK_THROWS_AS(PerturbedMatrix(base, {0.0}, ClipMode::strict, 0.0),
                        ShapeError);
    }
}
