#include <doctest.h>

#include <cmath>

#include "poisonmark/verify.hpp"

using namespace poisonmark;

namespace {

TrialConfig base_t42() {
    TrialConfig cfg;
    cfg.theorem_id = TheoremId::T4_2;
    cfg.d = 640;
    cfg.q = 384;
    cfg.budget = BudgetConfig{0.125, 0.03, 0.05};
    cfg.trials = 2000;
    cfg.seed = Seed128::from_hex("000102030405060708090a0b0c0d0e0f");
    return cfg;
}

}  // namespace

TEST_CASE("trial config validation") {
    auto cfg = base_t42();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.theorem_q_threshold() == 384);

    SUBCASE("q above d is rejected") {
        cfg.d = 256;
        CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    }
    SUBCASE("q below the theorem threshold needs the probe flag") {
        cfg.q = 300;
        CHECK_THROWS_AS(cfg.validate(), ModeError);
        cfg.expected_fail = true;
        CHECK_NOTHROW(cfg.validate());
    }
    SUBCASE("zero trials are rejected") {
        cfg.trials = 0;
        CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    }
    SUBCASE("universal theorems need n") {
        cfg.theorem_id = TheoremId::T4_8;
        cfg.q = 1036;
        cfg.d = 3072;
        cfg.n = 0;
        CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    }
}

TEST_CASE("wilson upper bound") {
    CHECK(wilson_upper99(100, 100) == 1.0);
    CHECK(wilson_upper99(0, 100) > 0.0);
    CHECK(wilson_upper99(90, 100) > 0.9);
    CHECK(wilson_upper99(90, 100) < 1.0);
    // Tighter with more trials.
    CHECK(wilson_upper99(900, 1000) < wilson_upper99(90, 100));
    CHECK_THROWS_AS(wilson_upper99(0, 0), ArgumentError);
}

TEST_CASE("T4_2 passes its guarantee at the theorem length") {
    const auto out = run_trial(base_t42(), 2);
    CHECK(out.trial_count == 2000);
    CHECK(out.guaranteed_success == doctest::Approx(0.9));
    CHECK(out.empirical_success >= 0.99);
    CHECK(out.passed);
    // Invariant: passed => empirical + halfwidth >= guaranteed.
    CHECK(out.empirical_success + out.wilson_halfwidth >=
          out.guaranteed_success);
}

TEST_CASE("trials are seed deterministic") {
    auto cfg = base_t42();
    cfg.trials = 500;
    const auto a = run_trial(cfg, 2);
    const auto b = run_trial(cfg, 2);
    CHECK(a.success_count == b.success_count);
    CHECK(a.empirical_success == b.empirical_success);
}

TEST_CASE("parallel and sequential runs agree bit-for-bit") {
    auto cfg = base_t42();
    cfg.trials = 800;
    const auto seq = run_trial(cfg, 1);
    const auto par = run_trial(cfg, 3);
    CHECK(seq.success_count == par.success_count);
}

TEST_CASE("T4_1 with adversarial poison still clears the guarantee") {
    TrialConfig cfg;
    cfg.theorem_id = TheoremId::T4_1;
    cfg.d = 1024;
    cfg.q = 627;
    cfg.budget = BudgetConfig{0.125, 0.03, 0.05};
    cfg.trials = 3000;
    cfg.seed = Seed128::from_hex("00000000000000000000000000000777");
    cfg.poison = PoisonLaw::adversarial;
    const auto out = run_trial(cfg, 2);
    CHECK(out.passed);
    CHECK(out.empirical_success >= 0.99);
}

TEST_CASE("a deliberately weak probe shows degraded success") {
    TrialConfig cfg;
    cfg.theorem_id = TheoremId::T4_2;
    cfg.d = 640;
    cfg.q = 40;
    cfg.budget = BudgetConfig{0.02, 0.0, 0.05};
    cfg.trials = 2000;
    cfg.seed = Seed128::from_hex("00000000000000000000000000000abc");
    cfg.expected_fail = true;
    const auto out = run_trial(cfg, 2);
    CHECK_FALSE(out.passed);
    CHECK(out.empirical_success < 0.8);
}

TEST_CASE("universal all-pairs proposition at small scale") {
    TrialConfig cfg;
    cfg.theorem_id = TheoremId::P4_7;
    cfg.d = 512;
    cfg.n = 200;
    cfg.budget = BudgetConfig{0.5, 0.03, 0.1};
    cfg.q = 150;  // threshold 16 ln(2000) = 121.6 -> 122
    cfg.trials = 100;
    cfg.seed = Seed128::from_hex("00000000000000000000000000000123");
    CHECK(cfg.theorem_q_threshold() == 122);
    const auto out = run_trial(cfg, 2);
    CHECK(out.passed);
    CHECK(out.guaranteed_success == doctest::Approx(0.9));
}

TEST_CASE("gap-margin events hold at small scale") {
    TrialConfig cfg;
    cfg.theorem_id = TheoremId::C4_8_gap;
    cfg.d = 1024;
    cfg.n = 100;
    cfg.budget = BudgetConfig{0.5, 0.03, 0.1};
    cfg.q = 275;  // threshold 36 ln(1000) = 248.7 -> 249
    cfg.trials = 100;
    cfg.seed = Seed128::from_hex("00000000000000000000000000000456");
    const auto out = run_trial(cfg, 2);
    CHECK(out.passed);
}

TEST_CASE("COVERT_F stays at chance with an independent key") {
    TrialConfig cfg;
    cfg.theorem_id = TheoremId::COVERT_F;
    cfg.d = 512;
    cfg.q = 256;
    cfg.budget = BudgetConfig{16.0 / 255.0, 8.0 / 255.0, 0.05};
    cfg.trials = 4000;
    cfg.seed = Seed128::from_hex("00000000000000000000000000000789");
    const auto out = run_trial(cfg, 2);
    CHECK(out.passed);
    CHECK(out.empirical_success > 0.45);
    CHECK(out.empirical_success < 0.55);
    CHECK(out.guaranteed_success == 0.5);
}

TEST_CASE("distribution generalization check") {
    // Margins need q = d = 256 here: at this scale the shared-key drift
    // leaves a narrow but nonempty window of acceptable keys, which the
    // premise search finds by retrying (faithful to "if there exists a key").
    const BudgetConfig budget{0.125, 0.03, 0.05};
    const Seed128 seed = Seed128::from_hex("00000000000000000000000000000def");

    SUBCASE("n_train = 50 d passes the bound") {
        const auto out = distribution_generalization_check(
            256, 12800, 2560, 256, budget, 0.05, seed, 2);
        CHECK_FALSE(out.vacuous);
        CHECK(out.passed);
        CHECK(out.guaranteed_success > 0.0);
        CHECK(out.empirical_success >= out.guaranteed_success);
    }
    SUBCASE("n_train = d is vacuous but flagged") {
        const auto out = distribution_generalization_check(
            256, 256, 640, 256, budget, 0.05, seed, 2);
        CHECK(out.vacuous);
        CHECK(out.guaranteed_success == 0.0);
        CHECK(out.passed);
    }
    SUBCASE("same seed twice gives identical counts") {
        const auto a = distribution_generalization_check(
            256, 12800, 2560, 256, budget, 0.05, seed, 1);
        const auto b = distribution_generalization_check(
            256, 12800, 2560, 256, budget, 0.05, seed, 3);
        CHECK(a.success_count == b.success_count);
    }
}

TEST_CASE("suite parsing") {
    SUBCASE("empty suite runs and passes") {
        const auto configs = parse_suite("[]");
        CHECK(configs.empty());
        const auto result = run_suite(configs);
        CHECK(result.all_passed);
        CHECK(result.outcomes.empty());
    }
    SUBCASE("parse errors carry line info") {
        CHECK_THROWS_WITH_AS(parse_suite("[\n{\"theorem\": }\n]"),
                             doctest::Contains("line 2"), FormatError);
    }
    SUBCASE("non-array configs are rejected") {
        CHECK_THROWS_AS(parse_suite("{}"), FormatError);
    }
    SUBCASE("a full entry round trips") {
        const std::string text = R"([{
            "theorem": "T4_2", "d": 640, "q": 384,
            "eps_w": 0.125, "eps_p": 0.03, "omega": 0.05,
            "trials": 50, "seed": "000102030405060708090a0b0c0d0e0f",
            "data_law": "beta_like", "poison": "adversarial",
            "label": "smoke"
        }])";
        const auto configs = parse_suite(text);
        REQUIRE(configs.size() == 1);
        CHECK(configs[0].theorem_id == TheoremId::T4_2);
        CHECK(configs[0].data_law == DataLaw::beta_like);
        CHECK(configs[0].poison == PoisonLaw::adversarial);
        CHECK(configs[0].label == "smoke");
    }
    SUBCASE("missing fields are flagged with the entry index") {
        CHECK_THROWS_WITH_AS(parse_suite(R"([{"theorem": "T4_2"}])"),
                             doctest::Contains("entry 0"), FormatError);
    }
}

TEST_CASE("suite aggregation ignores probes for the exit status") {
    auto good = base_t42();
    good.trials = 300;
    good.label = "good";

    TrialConfig probe = base_t42();
    probe.q = 40;
    probe.budget.eps_w = 0.02;
    probe.trials = 300;
    probe.expected_fail = true;
    probe.label = "probe";

    const auto result = run_suite({good, probe}, 2);
    REQUIRE(result.outcomes.size() == 2);
    CHECK(result.outcomes[0].passed);
    CHECK_FALSE(result.outcomes[1].passed);
    CHECK(result.all_passed);  // the probe does not gate the suite

    const std::string json_text = outcomes_to_json(result);
    CHECK(json_text.find("\"all_passed\": true") != std::string::npos);
    const std::string csv = outcomes_to_csv(result);
    CHECK(csv.find("good") != std::string::npos);
    CHECK(csv.find("probe") != std::string::npos);
}
