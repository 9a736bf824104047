#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonmark/rng.hpp"
#include "poisonmark/types.hpp"

namespace poisonmark {

// Certified statements: sample-wise pair events (T4_1, T4_2), universal
// all-example events (P4_4, P4_7), their gap-margin variants (C4_5_gap,
// C4_8_gap), most-example fraction events (T4_5, T4_8), the distributional
// generalization (T4_9), and covertness under an independent key (COVERT_F).
enum class TheoremId {
    T4_1,
    T4_2,
    P4_4,
    C4_5_gap,
    T4_5,
    P4_7,
    C4_8_gap,
    T4_8,
    T4_9,
    COVERT_F,
};

std::string theorem_name(TheoremId id);
TheoremId theorem_from_name(const std::string& name);

enum class DataLaw { uniform01, beta_like, constant_half };
std::string data_law_name(DataLaw law);
DataLaw data_law_from_name(const std::string& name);

enum class PoisonLaw { none, random, adversarial };
std::string poison_law_name(PoisonLaw law);
PoisonLaw poison_law_from_name(const std::string& name);

struct TrialConfig {
    TheoremId theorem_id = TheoremId::T4_1;
    std::size_t d = 0;
    std::size_t n = 0;  // dataset size for universal theorems / train size for T4_9
    std::size_t q = 0;
    BudgetConfig budget;
    std::size_t trials = 1;
    Seed128 seed;
    DataLaw data_law = DataLaw::uniform01;
    PoisonLaw poison = PoisonLaw::random;
    bool expected_fail = false;  // probe: run it, report it, never gate on it
    std::size_t n_fresh = 0;     // T4_9 only
    double mu = 0.05;            // T4_9 only
    std::string label;

    // The theorem's own minimum q; 0 when the theorem imposes none.
    std::size_t theorem_q_threshold() const;
    // Throws unless trials >= 1, q <= d, and q meets the theorem threshold
    // (probes are exempt from the threshold).
    void validate() const;
};

struct TrialOutcome {
    std::string label;
    TheoremId theorem_id = TheoremId::T4_1;
    double empirical_success = 0.0;
    double guaranteed_success = 0.0;
    bool passed = false;
    double wilson_halfwidth = 0.0;
    std::uint64_t success_count = 0;
    std::uint64_t trial_count = 0;
    bool expected_fail = false;
    bool vacuous = false;
    double elapsed_seconds = 0.0;
};

// One-sided 99% Wilson bounds for a success frequency.
double wilson_upper99(double successes, double trials);
double wilson_lower99(double successes, double trials);

// Runs the theorem's sampling model `trials` times and compares the success
// frequency against the guaranteed probability: a trial passes unless its
// Wilson interval sits entirely below the guarantee. Sample-wise theorems
// draw a fresh key per trial; universal theorems draw a fresh dataset and
// one key per trial; COVERT_F draws keys independent of the watermark.
TrialOutcome run_trial(const TrialConfig& cfg, std::size_t threads = 0);

// Finds a key meeting the finite-sample margins on n_train samples, then
// measures the joint margin event on fresh pairs. Passes iff the fresh
// frequency reaches 1 - 2*omega - radical(d, n_train, mu); n_train < d makes
// the bound vacuous and is flagged.
TrialOutcome distribution_generalization_check(std::size_t d,
                                               std::size_t n_train,
                                               std::size_t n_fresh,
                                               std::size_t q,
                                               const BudgetConfig& budget,
                                               double mu, Seed128 seed,
                                               std::size_t threads = 0);

struct SuiteResult {
    std::vector<TrialOutcome> outcomes;
    // True when every non-probe trial passed.
    bool all_passed = true;
};

std::vector<TrialConfig> parse_suite(const std::string& json_text);
SuiteResult run_suite(const std::vector<TrialConfig>& configs,
                      std::size_t threads = 0);

std::string outcomes_to_json(const SuiteResult& result);
std::string outcomes_to_csv(const SuiteResult& result);

}  // namespace poisonmark
