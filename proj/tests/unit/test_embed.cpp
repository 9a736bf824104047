#include <doctest.h>

#include <cmath>
#include <numeric>

#include "poisonmark/detect.hpp"
#include "poisonmark/embed.hpp"

using namespace poisonmark;

namespace {

WatermarkPlan universal_post_plan(const Key& key, double eps_w,
                                  double eps_p = 0.0) {
    WatermarkPlan plan;
    plan.scheme = Scheme::universal_post;
    plan.budget = BudgetConfig{eps_w, eps_p, 0.05};
    plan.partition = key.partition;
    plan.key_source = key;
    return plan;
}

double ulp_of(double v) { return std::nextafter(v, 1e300) - v; }

}  // namespace

TEST_CASE("craft copies key signs scaled by eps_w") {
    Key key;
    key.dim = 3;
    key.entries = {1, -1, 1};
    key.mode = KeyMode::identical;
    key.partition = partition_from_dims(3, {0, 1, 2}, PartitionMode::post);
    const auto plan = universal_post_plan(key, 0.1);
    const auto wm = craft_watermark(plan);
    CHECK(wm == std::vector<double>{0.1, -0.1, 0.1});
}

TEST_CASE("craft is zero off W in concurrent mode") {
    const auto p = partition_from_dims(3, {1}, PartitionMode::concurrent);
    const Key key = sample_concurrent_key(p, Seed128{1, 2});
    WatermarkPlan plan;
    plan.scheme = Scheme::universal_concurrent;
    plan.budget = BudgetConfig{0.05, 0.0, 0.05};
    plan.partition = p;
    plan.key_source = key;
    const auto wm = craft_watermark(plan);
    CHECK(wm[0] == 0.0);
    CHECK(wm[2] == 0.0);
    CHECK(std::abs(wm[1]) == 0.05);
    CHECK(wm[1] == 0.05 * key.entries[1]);
}

TEST_CASE("zeta . delta_w equals q * eps_w within 2 ulps") {
    for (const std::size_t q : {std::size_t{7}, std::size_t{128},
                                std::size_t{1000}}) {
        const auto p = make_partition(2048, q, Seed128{2, q},
                                      PartitionMode::post);
        Key key = sample_identical_key(2048, Seed128{3, q});
        key.partition = p;
        const double eps = 16.0 / 255.0;
        auto plan = universal_post_plan(key, eps);
        const auto wm = craft_watermark(plan);
        double linf = 0.0;
        for (const double v : wm) linf = std::max(linf, std::abs(v));
        CHECK(linf == eps);
        const double target = static_cast<double>(q) * eps;
        CHECK(std::abs(score(key, wm) - target) <= 2.0 * ulp_of(target));
    }
}

TEST_CASE("sample-wise craft requires an id") {
    const auto p = make_partition(16, 4, Seed128{4, 4}, PartitionMode::post);
    WatermarkPlan plan;
    plan.scheme = Scheme::sample_wise_post;
    plan.budget = BudgetConfig{0.1, 0.0, 0.05};
    plan.partition = p;
    plan.key_source = KeyStream{Seed128{5, 5}};
    CHECK_THROWS_AS(craft_watermark(plan), ArgumentError);
    CHECK_NOTHROW(craft_watermark(plan, std::string("img-0")));
}

TEST_CASE("post embedding moves 0.5 rows to {0.4, 0.6}") {
    const auto data = validate_matrix(1, 4, {0.5, 0.5, 0.5, 0.5});
    Key key = sample_identical_key(4, Seed128{6, 6});
    const auto plan = universal_post_plan(key, 0.1);
    const auto pm = embed_post_poisoning(data, plan, ClipMode::strict);
    for (const double v : pm.row(0)) {
        CHECK((v == doctest::Approx(0.4) || v == doctest::Approx(0.6)));
    }
    CHECK(pm.clipped_fraction() == 0.0);
}

TEST_CASE("strict mode rejects overflow with the offending entry") {
    const auto data = validate_matrix(1, 2, {0.99, 0.5});
    Key key;
    key.dim = 2;
    key.entries = {1, 1};
    key.mode = KeyMode::identical;
    key.partition = partition_from_dims(2, {0, 1}, PartitionMode::post);
    const auto plan = universal_post_plan(key, 0.1);
    CHECK_THROWS_WITH_AS(embed_post_poisoning(data, plan, ClipMode::strict),
                         doctest::Contains("col 0"), RangeError);
    const auto pm = embed_post_poisoning(data, plan, ClipMode::clip);
    CHECK(pm.row(0)[0] == 1.0);
    CHECK(pm.clipped_fraction() == doctest::Approx(0.5));
}

TEST_CASE("embedding does not mutate the input matrix") {
    const auto data = validate_matrix(2, 2, {0.5, 0.5, 0.25, 0.75});
    const auto before = data.values();
    Key key = sample_identical_key(2, Seed128{7, 7});
    const auto plan = universal_post_plan(key, 0.1);
    (void)embed_post_poisoning(data, plan, ClipMode::clip);
    CHECK(data.values() == before);
}

TEST_CASE("post embedding separates uniform data perfectly at q=2000") {
    // Table-1 shape: d=3072, q=2000, eps_w=16/255 on uniform data.
    const std::size_t d = 3072, q = 2000, n = 2000;
    const auto part = make_partition(d, q, Seed128{8, 1}, PartitionMode::post);
    Key key = sample_identical_key(d, Seed128{8, 2});
    key.partition = part;
    auto plan = universal_post_plan(key, 16.0 / 255.0);

    Rng rng(Seed128{8, 3});
    std::vector<double> values(n * d);
    for (auto& v : values) v = rng.next_unit();
    const auto clean = DataMatrix::unchecked(n, d, values);
    const auto pm = embed_post_poisoning(clean, plan, ClipMode::clip);

    std::vector<double> pos(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
        pos[i] = score(key, pm.row(i));
        neg[i] = score(key, clean.row(i));
    }
    CHECK(auroc(pos, neg) == 1.0);
}

TEST_CASE("concurrent embedding with zero poison is watermark only") {
    const std::size_t d = 8;
    const auto p = make_partition(d, 3, Seed128{9, 1},
                                  PartitionMode::concurrent);
    const Key key = sample_concurrent_key(p, Seed128{9, 2});
    WatermarkPlan plan;
    plan.scheme = Scheme::universal_concurrent;
    plan.budget = BudgetConfig{0.1, 0.0, 0.05};
    plan.partition = p;
    plan.key_source = key;
    const auto data = validate_matrix(2, d, std::vector<double>(16, 0.5));
    const std::vector<double> no_poison(16, 0.0);
    const auto pm =
        embed_poisoning_concurrent(data, no_poison, plan, ClipMode::strict);
    const auto wm = craft_watermark(plan);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            CHECK(pm.delta()[i * d + j] == wm[j]);
        }
    }
}

TEST_CASE("poison on W is a partition violation") {
    const std::size_t d = 8;
    const auto p = make_partition(d, 3, Seed128{10, 1},
                                  PartitionMode::concurrent);
    const Key key = sample_concurrent_key(p, Seed128{10, 2});
    WatermarkPlan plan;
    plan.scheme = Scheme::universal_concurrent;
    plan.budget = BudgetConfig{0.1, 0.1, 0.05};
    plan.partition = p;
    plan.key_source = key;
    const auto data = validate_matrix(1, d, std::vector<double>(d, 0.5));
    std::vector<double> poison(d, 0.0);
    poison[p.watermark_dims[0]] = 0.01;
    CHECK_THROWS_AS(
        embed_poisoning_concurrent(data, poison, plan, ClipMode::clip),
        ModeError);
}

TEST_CASE("concurrent deltas have disjoint supports and max-budget L-inf") {
    const std::size_t d = 64, n = 100;
    const double eps_w = 0.08, eps_p = 0.05;
    const auto p = make_partition(d, 24, Seed128{11, 1},
                                  PartitionMode::concurrent);
    const Key key = sample_concurrent_key(p, Seed128{11, 2});
    WatermarkPlan plan;
    plan.scheme = Scheme::universal_concurrent;
    plan.budget = BudgetConfig{eps_w, eps_p, 0.05};
    plan.partition = p;
    plan.key_source = key;

    std::vector<double> values(n * d, 0.5);
    const auto data = DataMatrix::unchecked(n, d, values);
    // Saturating poison: +-eps_p on every poison dim.
    std::vector<double> poison(n * d, 0.0);
    Rng rng(Seed128{11, 3});
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto j : p.poison_dims) {
            poison[i * d + j] = eps_p * rng.sign();
        }
    }
    const auto pm =
        embed_poisoning_concurrent(data, poison, plan, ClipMode::strict);
    double linf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t w_cursor = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double dj = pm.delta()[i * d + j];
            const bool on_w = w_cursor < p.watermark_dims.size() &&
                              p.watermark_dims[w_cursor] == j;
            if (on_w) {
                ++w_cursor;
                REQUIRE(std::abs(dj) == eps_w);
            } else {
                REQUIRE(std::abs(dj) == eps_p);
            }
            linf = std::max(linf, std::abs(dj));
        }
    }
    CHECK(linf == std::max(eps_w, eps_p));
}

TEST_CASE("random poison: budget, zero case, centered mean") {
    std::vector<std::size_t> dims(32);
    std::iota(dims.begin(), dims.end(), std::size_t{0});

    const auto zero = random_poison(32, 0.0, dims, Seed128{12, 1});
    for (const double v : zero) CHECK(v == 0.0);

    const double eps = 0.03;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::uint64_t t = 0; t < 3125; ++t) {  // 3125 * 32 = 10^5 draws
        const auto v = random_poison(32, eps, dims, Seed128{12, 2 + t});
        for (const double x : v) {
            REQUIRE(x >= -eps);
            REQUIRE(x <= eps);
            sum += x;
            ++count;
        }
    }
    // 4 sigma of the mean of uniform[-eps, eps] draws.
    const double sigma = eps / std::sqrt(3.0 * static_cast<double>(count));
    CHECK(std::abs(sum / static_cast<double>(count)) < 4.0 * sigma);
}

TEST_CASE("random poison matrix is row-seed deterministic") {
    std::vector<std::size_t> dims{0, 1, 2, 3};
    const auto a = random_poison_matrix(5, 4, 0.1, dims, Seed128{13, 1});
    const auto b = random_poison_matrix(5, 4, 0.1, dims, Seed128{13, 1});
    CHECK(a == b);
}

TEST_CASE("sample-wise watermarks for distinct ids are uncorrelated") {
    const std::size_t d = 64, q = 64, pairs = 10000;
    const auto p = make_partition(d, q, Seed128{14, 1}, PartitionMode::post);
    WatermarkPlan plan;
    plan.scheme = Scheme::sample_wise_post;
    plan.budget = BudgetConfig{1.0, 0.0, 0.05};
    plan.partition = p;
    plan.key_source = KeyStream{Seed128{14, 2}};

    double mean_corr = 0.0;
    for (std::size_t t = 0; t < pairs; ++t) {
        const auto a = craft_watermark(plan, "a-" + std::to_string(t));
        const auto b = craft_watermark(plan, "b-" + std::to_string(t));
        mean_corr += pairwise_dot(a, b) / static_cast<double>(q);
    }
    mean_corr /= static_cast<double>(pairs);
    const double sigma =
        1.0 / std::sqrt(static_cast<double>(q) * static_cast<double>(pairs));
    CHECK(std::abs(mean_corr) < 4.0 * sigma);
}
