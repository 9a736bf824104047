#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace poisonmark {

// Minimum watermark lengths. Each returns the smallest integer strictly
// satisfying the strict inequality of its bound, floored at 1. Natural logs
// throughout.

// Sample-wise, post-poisoning: q > (1/eps_w) * sqrt(2 d ln(1/omega)).
std::int64_t q_min_sample_post(std::int64_t d, double eps_w, double omega);

// Sample-wise, poisoning-concurrent: q > (2/eps_w^2) * ln(1/omega).
// Independent of d.
std::int64_t q_min_sample_concurrent(double eps_w, double omega);

// Universal, post, every example:
// q > ((2+eps_p)/eps_w) * sqrt((d/2) ln(2N/omega)).
std::int64_t q_min_universal_post_all(std::int64_t d, std::int64_t n,
                                      double eps_w, double eps_p, double omega);

// Universal, post, most examples: q > (2/eps_w) * sqrt(2 d ln(1/omega)).
std::int64_t q_min_universal_post_most(std::int64_t d, double eps_w,
                                       double omega);

// Universal, concurrent, every example: q > (4/eps_w^2) * ln(N/omega).
std::int64_t q_min_universal_concurrent_all(std::int64_t n, double eps_w,
                                            double omega);

// Universal, concurrent, most examples: q > (9/(2 eps_w^2)) * ln(1/omega).
std::int64_t q_min_universal_concurrent_most(double eps_w, double omega);

// Failure-probability evaluations for the most-examples theorems. The bound
// is vacuous when the inner term exp(-...) reaches omega; vacuous results
// report value 1 with the flag set instead of a silent 1.
struct FailProb {
    double value = 1.0;
    bool vacuous = true;
};

// Failure mass 2*exp(-N (omega - t)^2 / (omega + t)), t = exp(-q^2 eps_w^2 / 8d).
FailProb fail_prob_post_most(std::int64_t n, std::int64_t d, std::int64_t q,
                             double eps_w, double omega);

// Failure mass exp(-N (omega - t)^2 / (omega + t)), t = exp(-2 q eps_w^2 / 9).
FailProb fail_prob_concurrent_most(std::int64_t n, std::int64_t q, double eps_w,
                                   double omega);

// Distributional-generalization error term
// 2 * sqrt((d/N)(ln(2N/d) + 1) - (1/N) ln(mu/4)).
double generalization_radical(std::int64_t d, std::int64_t n, double mu);

// Smallest N >= d whose radical is below `slack` (monotone bisection).
std::int64_t generalization_sample_floor(std::int64_t d, double mu,
                                         double slack);

// Asymptotic poisoning-utility ceiling scale sqrt(d)/eps_p; the constant is
// unknown, so this is a scale with a note, not a certified cutoff.
struct PoisonUtilityCeiling {
    double scale = 0.0;
    bool infinite = false;
    std::string note;
};
PoisonUtilityCeiling poison_utility_ceiling_note(std::int64_t d, double eps_p);

// Precondition of the ordering remark: eps_w >= 2*sqrt(ln(1/omega)/(2d)),
// under which the concurrent sample-wise length is no larger than the post one.
bool sample_ordering_precondition(std::int64_t d, double eps_w, double omega);

// Every closed form evaluated at one parameter point.
struct BoundReport {
    std::int64_t d = 0;
    std::int64_t n = 0;
    std::int64_t q = 0;
    double eps_w = 0.0;
    double eps_p = 0.0;
    double omega = 0.0;
    std::int64_t q_min_sample_post = 0;
    std::int64_t q_min_sample_concurrent = 0;
    std::int64_t q_min_universal_post_all = 0;
    std::int64_t q_min_universal_post_most = 0;
    std::int64_t q_min_universal_concurrent_all = 0;
    std::int64_t q_min_universal_concurrent_most = 0;
    FailProb fail_prob_post_most;
    FailProb fail_prob_concurrent_most;
    std::string q_max_poison_utility_note;

    std::string to_json() const;
    std::string to_table() const;
};

// q <= 0 picks q = q_min_universal_post_most as the evaluation point for the
// failure probabilities.
BoundReport evaluate_bounds(std::int64_t d, std::int64_t n, double eps_w,
                            double eps_p, double omega, std::int64_t q = 0);

}  // namespace poisonmark
