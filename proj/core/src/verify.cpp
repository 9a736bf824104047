#include "poisonmark/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "poisonmark/bounds.hpp"
#include "poisonmark/detect.hpp"
#include "poisonmark/embed.hpp"
#include "poisonmark/error.hpp"
#include "poisonmark/keying.hpp"
#include "poisonmark/parallel.hpp"
#include "poisonmark/partition.hpp"

namespace poisonmark {

using nlohmann::json;

std::string theorem_name(TheoremId id) {
    switch (id) {
        case TheoremId::T4_1: return "T4_1";
        case TheoremId::T4_2: return "T4_2";
        case TheoremId::P4_4: return "P4_4";
        case TheoremId::C4_5_gap: return "C4_5_gap";
        case TheoremId::T4_5: return "T4_5";
        case TheoremId::P4_7: return "P4_7";
        case TheoremId::C4_8_gap: return "C4_8_gap";
        case TheoremId::T4_8: return "T4_8";
        case TheoremId::T4_9: return "T4_9";
        case TheoremId::COVERT_F: return "COVERT_F";
    }
    return "?";
}

TheoremId theorem_from_name(const std::string& name) {
    for (const TheoremId id :
         {TheoremId::T4_1, TheoremId::T4_2, TheoremId::P4_4, TheoremId::C4_5_gap,
          TheoremId::T4_5, TheoremId::P4_7, TheoremId::C4_8_gap, TheoremId::T4_8,
          TheoremId::T4_9, TheoremId::COVERT_F}) {
        if (theorem_name(id) == name) return id;
    }
    throw FormatError("unknown theorem id '" + name + "'");
}

std::string data_law_name(DataLaw law) {
    switch (law) {
        case DataLaw::uniform01: return "uniform01";
        case DataLaw::beta_like: return "beta_like";
        case DataLaw::constant_half: return "constant_half";
    }
    return "?";
}

DataLaw data_law_from_name(const std::string& name) {
    if (name == "uniform01") return DataLaw::uniform01;
    if (name == "beta_like") return DataLaw::beta_like;
    if (name == "constant_half") return DataLaw::constant_half;
    throw FormatError("unknown data law '" + name + "'");
}

std::string poison_law_name(PoisonLaw law) {
    switch (law) {
        case PoisonLaw::none: return "none";
        case PoisonLaw::random: return "random";
        case PoisonLaw::adversarial: return "adversarial";
    }
    return "?";
}

PoisonLaw poison_law_from_name(const std::string& name) {
    if (name == "none") return PoisonLaw::none;
    if (name == "random") return PoisonLaw::random;
    if (name == "adversarial") return PoisonLaw::adversarial;
    throw FormatError("unknown poison law '" + name + "'");
}

namespace {

constexpr double kWilsonZ99 = 2.3263478740408408;  // one-sided 99%
constexpr double kCovertBand = 0.03;

Seed128 sub_seed(Seed128 parent, std::uint64_t tag) {
    return Rng(parent).derive(tag);
}

// Seed tags within one trial.
enum : std::uint64_t {
    kTagPartition = 0,
    kTagKey = 1,
    kTagData = 2,
    kTagPoison = 3,
    kTagWatermarkKey = 4,
};

double draw_value(Rng& rng, DataLaw law) {
    switch (law) {
        case DataLaw::uniform01:
            return rng.next_unit();
        case DataLaw::beta_like: {
            // Skewed toward 0, like mostly-dark image channels.
            const double u = rng.next_unit();
            return u * u * u * u;
        }
        case DataLaw::constant_half:
            return 0.5;
    }
    return 0.5;
}

void fill_row(Rng& rng, DataLaw law, std::vector<double>& row) {
    for (double& v : row) v = draw_value(rng, law);
}

// Poison delta for the post-poisoning support [d]. The adversarial variant
// minimizes the detection score against the given key.
void fill_poison(Rng& rng, PoisonLaw law, double eps_p, const Key& key,
                 std::vector<double>& delta) {
    switch (law) {
        case PoisonLaw::none:
            std::fill(delta.begin(), delta.end(), 0.0);
            return;
        case PoisonLaw::random:
            for (double& v : delta) v = rng.uniform(-eps_p, eps_p);
            return;
        case PoisonLaw::adversarial:
            for (std::size_t j = 0; j < delta.size(); ++j) {
                delta[j] = key.entries[j] > 0 ? -eps_p : eps_p;
            }
            return;
    }
}

struct Scratch {
    std::vector<double> x1, x2, poison, watermark;
};

// Sample-wise events: fresh key, fresh pair, fresh watermark per trial.
// Success: zeta^T (x1 + delta_p + delta_w) > zeta^T x2.
bool sample_wise_trial(const TrialConfig& cfg, Seed128 trial_seed,
                       Scratch& scratch) {
    const bool concurrent = cfg.theorem_id == TheoremId::T4_2;
    const auto partition =
        make_partition(cfg.d, cfg.q, sub_seed(trial_seed, kTagPartition),
                       concurrent ? PartitionMode::concurrent
                                  : PartitionMode::post);
    const Key key =
        concurrent
            ? sample_concurrent_key(partition, sub_seed(trial_seed, kTagKey))
            : sample_identical_key(cfg.d, sub_seed(trial_seed, kTagKey));

    scratch.x1.resize(cfg.d);
    scratch.x2.resize(cfg.d);
    scratch.poison.assign(cfg.d, 0.0);
    Rng data_rng(sub_seed(trial_seed, kTagData));
    fill_row(data_rng, cfg.data_law, scratch.x1);
    fill_row(data_rng, cfg.data_law, scratch.x2);

    if (cfg.budget.eps_p > 0.0 && cfg.poison != PoisonLaw::none) {
        if (concurrent) {
            // Concurrent poison lives on P; the key is zero there, so the
            // score contribution is exactly zero. Generated anyway so the
            // event includes the full perturbation.
            Rng poison_rng(sub_seed(trial_seed, kTagPoison));
            for (const std::size_t j : partition.poison_dims) {
                scratch.poison[j] =
                    cfg.poison == PoisonLaw::adversarial
                        ? cfg.budget.eps_p  // sign does not matter off W
                        : poison_rng.uniform(-cfg.budget.eps_p, cfg.budget.eps_p);
            }
        } else {
            Rng poison_rng(sub_seed(trial_seed, kTagPoison));
            fill_poison(poison_rng, cfg.poison, cfg.budget.eps_p, key,
                        scratch.poison);
        }
    }

    WatermarkPlan plan;
    plan.scheme = concurrent ? Scheme::sample_wise_concurrent
                             : Scheme::sample_wise_post;
    plan.budget = cfg.budget;
    plan.partition = partition;
    plan.key_source = key;
    scratch.watermark = craft_watermark(plan, std::string("trial"));

    const double wm_gain = score(key, scratch.watermark);
    const double v1 =
        score(key, scratch.x1) + score(key, scratch.poison) + wm_gain;
    const double v2 = score(key, scratch.x2);
    return v1 > v2;
}

enum class UniversalEvent { all_pairs, gap_all, gap_fraction };

struct UniversalSpec {
    bool concurrent = false;
    UniversalEvent event = UniversalEvent::all_pairs;
    double c1_scale = 0.0;        // gap margins as multiples of q*eps_w
    double c2_scale = 0.0;
    double fraction_slack = 0.0;  // 1 or 2 omegas of allowed failures
};

UniversalSpec universal_spec(TheoremId id) {
    switch (id) {
        case TheoremId::P4_4:
            return {false, UniversalEvent::all_pairs, 0, 0, 0};
        case TheoremId::C4_5_gap:
            return {false, UniversalEvent::gap_all, 0.5, 0.25, 0};
        case TheoremId::T4_5:
            return {false, UniversalEvent::gap_fraction, 0.5, 0.25, 2.0};
        case TheoremId::P4_7:
            return {true, UniversalEvent::all_pairs, 0, 0, 0};
        case TheoremId::C4_8_gap:
            return {true, UniversalEvent::gap_all, 2.0 / 3.0, 1.0 / 3.0, 0};
        case TheoremId::T4_8:
            return {true, UniversalEvent::gap_fraction, 2.0 / 3.0, 1.0 / 3.0, 1.0};
        default:
            throw ArgumentError("not a universal theorem");
    }
}

// Universal events: one key, one watermark, a fresh N-sample dataset per
// trial. Rows are streamed; only the running extrema / failure counts are
// kept.
bool universal_trial(const TrialConfig& cfg, Seed128 trial_seed,
                     Scratch& scratch) {
    const UniversalSpec spec = universal_spec(cfg.theorem_id);
    const auto partition =
        make_partition(cfg.d, cfg.q, sub_seed(trial_seed, kTagPartition),
                       spec.concurrent ? PartitionMode::concurrent
                                       : PartitionMode::post);
    const Key key =
        spec.concurrent
            ? sample_concurrent_key(partition, sub_seed(trial_seed, kTagKey))
            : sample_identical_key(cfg.d, sub_seed(trial_seed, kTagKey));

    WatermarkPlan plan;
    plan.scheme = spec.concurrent ? Scheme::universal_concurrent
                                  : Scheme::universal_post;
    plan.budget = cfg.budget;
    plan.partition = partition;
    plan.key_source = key;
    scratch.watermark = craft_watermark(plan);
    const double wm_gain = score(key, scratch.watermark);

    const double qe = static_cast<double>(cfg.q) * cfg.budget.eps_w;
    const double c1 = spec.c1_scale * qe;
    const double c2 = spec.c2_scale * qe;

    scratch.x1.resize(cfg.d);
    scratch.poison.assign(cfg.d, 0.0);
    Rng data_rng(sub_seed(trial_seed, kTagData));
    Rng poison_rng(sub_seed(trial_seed, kTagPoison));
    const bool with_poison =
        cfg.budget.eps_p > 0.0 && cfg.poison != PoisonLaw::none;

    double min_marked = std::numeric_limits<double>::infinity();
    double max_benign = -std::numeric_limits<double>::infinity();
    std::size_t failures = 0;

    for (std::size_t i = 0; i < cfg.n; ++i) {
        fill_row(data_rng, cfg.data_law, scratch.x1);
        const double benign = score(key, scratch.x1);
        double poison_term = 0.0;
        if (with_poison) {
            if (spec.concurrent) {
                // Support on P only; contributes exactly zero to the score.
                for (const std::size_t j : partition.poison_dims) {
                    scratch.poison[j] =
                        poison_rng.uniform(-cfg.budget.eps_p, cfg.budget.eps_p);
                }
            } else {
                fill_poison(poison_rng, cfg.poison, cfg.budget.eps_p, key,
                            scratch.poison);
            }
            poison_term = score(key, scratch.poison);
        }
        const double marked = benign + poison_term + wm_gain;
        switch (spec.event) {
            case UniversalEvent::all_pairs:
                min_marked = std::min(min_marked, marked);
                max_benign = std::max(max_benign, benign);
                break;
            case UniversalEvent::gap_all:
            case UniversalEvent::gap_fraction:
                if (!(marked > c1 && benign < c2)) ++failures;
                break;
        }
    }

    switch (spec.event) {
        case UniversalEvent::all_pairs:
            return min_marked > max_benign;
        case UniversalEvent::gap_all:
            return failures == 0;
        case UniversalEvent::gap_fraction:
            return static_cast<double>(failures) <=
                   spec.fraction_slack * cfg.budget.omega *
                       static_cast<double>(cfg.n);
    }
    return false;
}

// Covertness pair: the detection key is drawn independently of the key that
// crafted the watermark. Returns (marked score, benign score).
std::pair<double, double> covert_pair(const TrialConfig& cfg, Seed128 trial_seed,
                                      Scratch& scratch) {
    const auto partition = make_partition(
        cfg.d, cfg.q, sub_seed(trial_seed, kTagPartition), PartitionMode::post);
    const Key wm_key =
        sample_identical_key(cfg.d, sub_seed(trial_seed, kTagWatermarkKey));
    const Key detect_key =
        sample_identical_key(cfg.d, sub_seed(trial_seed, kTagKey));

    WatermarkPlan plan;
    plan.scheme = Scheme::universal_post;
    plan.budget = cfg.budget;
    plan.partition = partition;
    plan.key_source = wm_key;
    scratch.watermark = craft_watermark(plan);

    scratch.x1.resize(cfg.d);
    scratch.x2.resize(cfg.d);
    scratch.poison.assign(cfg.d, 0.0);
    Rng data_rng(sub_seed(trial_seed, kTagData));
    fill_row(data_rng, cfg.data_law, scratch.x1);
    fill_row(data_rng, cfg.data_law, scratch.x2);
    if (cfg.budget.eps_p > 0.0 && cfg.poison != PoisonLaw::none) {
        Rng poison_rng(sub_seed(trial_seed, kTagPoison));
        fill_poison(poison_rng, cfg.poison, cfg.budget.eps_p, wm_key,
                    scratch.poison);
    }
    const double marked = score(detect_key, scratch.x1) +
                          score(detect_key, scratch.poison) +
                          score(detect_key, scratch.watermark);
    const double benign = score(detect_key, scratch.x2);
    return {marked, benign};
}

double theorem_guarantee(const TrialConfig& cfg) {
    switch (cfg.theorem_id) {
        case TheoremId::T4_1:
        case TheoremId::T4_2:
            return 1.0 - 2.0 * cfg.budget.omega;
        case TheoremId::P4_4:
        case TheoremId::C4_5_gap:
        case TheoremId::P4_7:
        case TheoremId::C4_8_gap:
            return 1.0 - cfg.budget.omega;
        case TheoremId::T4_5: {
            const auto fp = fail_prob_post_most(
                static_cast<std::int64_t>(cfg.n), static_cast<std::int64_t>(cfg.d),
                static_cast<std::int64_t>(cfg.q), cfg.budget.eps_w,
                cfg.budget.omega);
            return fp.vacuous ? 0.0 : 1.0 - fp.value;
        }
        case TheoremId::T4_8: {
            const auto fp = fail_prob_concurrent_most(
                static_cast<std::int64_t>(cfg.n), static_cast<std::int64_t>(cfg.q),
                cfg.budget.eps_w, cfg.budget.omega);
            return fp.vacuous ? 0.0 : 1.0 - fp.value;
        }
        case TheoremId::T4_9:
        case TheoremId::COVERT_F:
            return 0.0;  // handled by their own pass rules
    }
    return 0.0;
}

}  // namespace

std::size_t TrialConfig::theorem_q_threshold() const {
    const auto di = static_cast<std::int64_t>(d);
    const auto ni = static_cast<std::int64_t>(n);
    switch (theorem_id) {
        case TheoremId::T4_1:
            return static_cast<std::size_t>(
                q_min_sample_post(di, budget.eps_w, budget.omega));
        case TheoremId::T4_2:
            return static_cast<std::size_t>(
                q_min_sample_concurrent(budget.eps_w, budget.omega));
        case TheoremId::P4_4:
            return static_cast<std::size_t>(q_min_universal_post_all(
                di, ni, budget.eps_w, budget.eps_p, budget.omega));
        case TheoremId::C4_5_gap: {
            const double bound =
                4.0 / budget.eps_w *
                std::sqrt(0.5 * static_cast<double>(d) *
                          std::log(2.0 * static_cast<double>(n) / budget.omega));
            return static_cast<std::size_t>(std::floor(bound)) + 1;
        }
        case TheoremId::T4_5:
            return static_cast<std::size_t>(
                q_min_universal_post_most(di, budget.eps_w, budget.omega));
        case TheoremId::P4_7:
            return static_cast<std::size_t>(
                q_min_universal_concurrent_all(ni, budget.eps_w, budget.omega));
        case TheoremId::C4_8_gap: {
            const double bound =
                9.0 / (budget.eps_w * budget.eps_w) *
                std::log(static_cast<double>(n) / budget.omega);
            return static_cast<std::size_t>(std::floor(bound)) + 1;
        }
        case TheoremId::T4_8:
            return static_cast<std::size_t>(
                q_min_universal_concurrent_most(budget.eps_w, budget.omega));
        case TheoremId::T4_9:
        case TheoremId::COVERT_F:
            return 0;
    }
    return 0;
}

void TrialConfig::validate() const {
    budget.validate();
    if (d == 0) throw ArgumentError("trial requires d >= 1");
    if (trials == 0) throw ArgumentError("trial requires trials >= 1");
    if (q == 0 || q > d) {
        throw ArgumentError("trial q = " + std::to_string(q) +
                            " must be in [1, d] with d = " + std::to_string(d));
    }
    const bool needs_n =
        theorem_id == TheoremId::P4_4 || theorem_id == TheoremId::C4_5_gap ||
        theorem_id == TheoremId::T4_5 || theorem_id == TheoremId::P4_7 ||
        theorem_id == TheoremId::C4_8_gap || theorem_id == TheoremId::T4_8 ||
        theorem_id == TheoremId::T4_9;
    if (needs_n && n == 0) {
        throw ArgumentError("trial for " + theorem_name(theorem_id) +
                            " requires n >= 1");
    }
    if (theorem_id == TheoremId::T4_9 && n_fresh == 0) {
        throw ArgumentError("T4_9 requires n_fresh >= 1");
    }
    const std::size_t threshold = theorem_q_threshold();
    if (threshold > 0 && q < threshold && !expected_fail) {
        throw ModeError("q = " + std::to_string(q) + " is below the " +
                        theorem_name(theorem_id) + " threshold " +
                        std::to_string(threshold) +
                        "; mark the trial expected_fail to probe it");
    }
}

double wilson_upper99(double successes, double trials) {
    if (trials <= 0) throw ArgumentError("wilson bound needs trials >= 1");
    if (successes >= trials) return 1.0;  // analytic upper bound at p = 1
    const double z = kWilsonZ99;
    const double p = successes / trials;
    const double z2n = z * z / trials;
    const double center = p + 0.5 * z2n;
    const double spread =
        z * std::sqrt(p * (1.0 - p) / trials + 0.25 * z2n / trials);
    return std::min(1.0, (center + spread) / (1.0 + z2n));
}

double wilson_lower99(double successes, double trials) {
    if (trials <= 0) throw ArgumentError("wilson bound needs trials >= 1");
    if (successes <= 0) return 0.0;
    const double z = kWilsonZ99;
    const double p = successes / trials;
    const double z2n = z * z / trials;
    const double center = p + 0.5 * z2n;
    const double spread =
        z * std::sqrt(p * (1.0 - p) / trials + 0.25 * z2n / trials);
    return std::max(0.0, (center - spread) / (1.0 + z2n));
}

TrialOutcome run_trial(const TrialConfig& cfg, std::size_t threads) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();

    if (cfg.theorem_id == TheoremId::T4_9) {
        TrialOutcome out = distribution_generalization_check(
            cfg.d, cfg.n, cfg.n_fresh, cfg.q, cfg.budget, cfg.mu, cfg.seed,
            threads);
        out.label = cfg.label.empty() ? theorem_name(cfg.theorem_id) : cfg.label;
        out.expected_fail = cfg.expected_fail;
        return out;
    }

    TrialOutcome out;
    out.label = cfg.label.empty() ? theorem_name(cfg.theorem_id) : cfg.label;
    out.theorem_id = cfg.theorem_id;
    out.expected_fail = cfg.expected_fail;
    out.trial_count = cfg.trials;

    const Rng seeder(cfg.seed);

    if (cfg.theorem_id == TheoremId::COVERT_F) {
        std::vector<double> marked(cfg.trials), benign(cfg.trials);
        parallel_for(cfg.trials, threads, [&](std::size_t begin, std::size_t end) {
            Scratch scratch;
            for (std::size_t t = begin; t < end; ++t) {
                const auto [m, b] = covert_pair(cfg, seeder.derive(t), scratch);
                marked[t] = m;
                benign[t] = b;
            }
        });
        out.empirical_success = auroc(marked, benign);
        out.guaranteed_success = 0.5;
        out.wilson_halfwidth = kCovertBand;
        out.passed = std::abs(out.empirical_success - 0.5) <= kCovertBand;
        out.success_count = static_cast<std::uint64_t>(
            std::llround(out.empirical_success * static_cast<double>(cfg.trials)));
    } else {
        std::vector<std::uint8_t> success(cfg.trials, 0);
        const bool sample_wise = cfg.theorem_id == TheoremId::T4_1 ||
                                 cfg.theorem_id == TheoremId::T4_2;
        parallel_for(cfg.trials, threads, [&](std::size_t begin, std::size_t end) {
            Scratch scratch;
            for (std::size_t t = begin; t < end; ++t) {
                const Seed128 ts = seeder.derive(t);
                success[t] = sample_wise ? sample_wise_trial(cfg, ts, scratch)
                                         : universal_trial(cfg, ts, scratch);
            }
        });
        std::uint64_t count = 0;
        for (const std::uint8_t s : success) count += s;
        out.success_count = count;
        out.empirical_success =
            static_cast<double>(count) / static_cast<double>(cfg.trials);
        out.guaranteed_success = theorem_guarantee(cfg);
        out.vacuous = out.guaranteed_success == 0.0;
        const double upper = wilson_upper99(static_cast<double>(count),
                                            static_cast<double>(cfg.trials));
        out.wilson_halfwidth = upper - out.empirical_success;
        out.passed = upper >= out.guaranteed_success;
    }

    out.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    return out;
}

TrialOutcome distribution_generalization_check(std::size_t d,
                                               std::size_t n_train,
                                               std::size_t n_fresh,
                                               std::size_t q,
                                               const BudgetConfig& budget,
                                               double mu, Seed128 seed,
                                               std::size_t threads) {
    budget.validate();
    if (d == 0 || n_train == 0 || n_fresh == 0 || q == 0 || q > d) {
        throw ArgumentError("invalid generalization-check parameters");
    }
    const auto start = std::chrono::steady_clock::now();

    TrialOutcome out;
    out.label = "T4_9";
    out.theorem_id = TheoremId::T4_9;
    out.trial_count = n_fresh;

    const bool premise_vacuous = n_train < d;
    const double radical = generalization_radical(
        static_cast<std::int64_t>(d), static_cast<std::int64_t>(n_train), mu);
    const double bound = 1.0 - 2.0 * budget.omega - radical;
    out.guaranteed_success = std::max(0.0, bound);
    out.vacuous = premise_vacuous || bound <= 0.0;

    const Rng seeder(seed);
    const Seed128 train_seed = seeder.derive(0);
    const Seed128 fresh_seed = seeder.derive(1);

    // Fixed training set and poisons; the key search re-scores them.
    std::vector<double> train(n_train * d), train_poison(n_train * d, 0.0);
    {
        Rng rng(sub_seed(train_seed, kTagData));
        for (double& v : train) v = draw_value(rng, DataLaw::uniform01);
        if (budget.eps_p > 0.0) {
            Rng prng(sub_seed(train_seed, kTagPoison));
            for (double& v : train_poison) {
                v = prng.uniform(-budget.eps_p, budget.eps_p);
            }
        }
    }

    const double qe = static_cast<double>(q) * budget.eps_w;
    const double c1 = 0.5 * qe;
    const double c2 = 0.25 * qe;
    const std::size_t allowed =
        static_cast<std::size_t>(std::floor(budget.omega *
                                            static_cast<double>(n_train)));

    constexpr std::size_t kMaxKeyAttempts = 1000;
    Key key;
    WatermarkPlan plan;
    bool found = false;
    for (std::size_t attempt = 0; attempt < kMaxKeyAttempts && !found;
         ++attempt) {
        const Seed128 ks = sub_seed(seed, 1000 + attempt);
        const auto partition =
            make_partition(d, q, sub_seed(ks, kTagPartition), PartitionMode::post);
        key = sample_identical_key(d, sub_seed(ks, kTagKey));
        plan.scheme = Scheme::universal_post;
        plan.budget = budget;
        plan.partition = partition;
        plan.key_source = key;
        const auto wm = craft_watermark(plan);
        const double wm_gain = score(key, wm);

        std::vector<std::uint8_t> ok(n_train, 0);
        parallel_for(n_train, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const std::span<const double> row(train.data() + i * d, d);
                const std::span<const double> prow(train_poison.data() + i * d, d);
                const double benign = score(key, row);
                const double marked = benign + score(key, prow) + wm_gain;
                ok[i] = marked > c1 && benign < c2;
            }
        });
        std::size_t failures = 0;
        for (const auto v : ok) failures += v == 0;
        found = failures <= allowed;
    }
    if (!found) {
        throw Error("no key satisfied the finite-sample margins after " +
                    std::to_string(kMaxKeyAttempts) + " attempts");
    }

    const auto wm = craft_watermark(plan);
    const double wm_gain = score(key, wm);
    std::vector<std::uint8_t> ok(n_fresh, 0);
    const Rng fresh_seeder(fresh_seed);
    parallel_for(n_fresh, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> x(d), xt(d), p(d, 0.0);
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(fresh_seeder.derive(i));
            fill_row(rng, DataLaw::uniform01, x);
            fill_row(rng, DataLaw::uniform01, xt);
            if (budget.eps_p > 0.0) {
                for (double& v : p) v = rng.uniform(-budget.eps_p, budget.eps_p);
            }
            const double marked = score(key, x) + score(key, p) + wm_gain;
            const double benign = score(key, xt);
            ok[i] = marked > c1 && benign < c2;
        }
    });
    std::uint64_t count = 0;
    for (const auto v : ok) count += v;
    out.success_count = count;
    out.empirical_success =
        static_cast<double>(count) / static_cast<double>(n_fresh);
    out.passed = out.empirical_success >= out.guaranteed_success;
    out.wilson_halfwidth = 0.0;
    out.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    return out;
}

namespace {

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

}  // namespace

std::vector<TrialConfig> parse_suite(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError("suite config parse error at line " +
                          std::to_string(line_of_byte(json_text, e.byte)) + ": " +
                          e.what());
    }
    if (!root.is_array()) {
        throw FormatError("suite config must be a JSON array of trials");
    }
    std::vector<TrialConfig> configs;
    configs.reserve(root.size());
    for (std::size_t idx = 0; idx < root.size(); ++idx) {
        const auto& j = root[idx];
        try {
            TrialConfig cfg;
            cfg.theorem_id = theorem_from_name(j.at("theorem").get<std::string>());
            cfg.d = j.at("d").get<std::size_t>();
            cfg.q = j.at("q").get<std::size_t>();
            cfg.n = j.value("n", std::size_t{0});
            cfg.budget.eps_w = j.at("eps_w").get<double>();
            cfg.budget.eps_p = j.value("eps_p", 0.0);
            cfg.budget.omega = j.at("omega").get<double>();
            cfg.trials = j.value("trials", std::size_t{1});
            cfg.seed = Seed128::from_hex(j.at("seed").get<std::string>());
            cfg.data_law =
                data_law_from_name(j.value("data_law", std::string("uniform01")));
            cfg.poison =
                poison_law_from_name(j.value("poison", std::string("random")));
            cfg.expected_fail = j.value("expected_fail", false);
            cfg.n_fresh = j.value("n_fresh", std::size_t{0});
            cfg.mu = j.value("mu", 0.05);
            cfg.label = j.value("label", std::string());
            cfg.validate();
            configs.push_back(std::move(cfg));
        } catch (const json::exception& e) {
            throw FormatError("suite entry " + std::to_string(idx) +
                              " is malformed: " + e.what());
        }
    }
    return configs;
}

SuiteResult run_suite(const std::vector<TrialConfig>& configs,
                      std::size_t threads) {
    SuiteResult result;
    result.outcomes.reserve(configs.size());
    for (const auto& cfg : configs) {
        TrialOutcome outcome = run_trial(cfg, threads);
        if (!cfg.expected_fail && !outcome.passed) result.all_passed = false;
        result.outcomes.push_back(std::move(outcome));
    }
    return result;
}

std::string outcomes_to_json(const SuiteResult& result) {
    json arr = json::array();
    for (const auto& o : result.outcomes) {
        arr.push_back({{"label", o.label},
                       {"theorem", theorem_name(o.theorem_id)},
                       {"empirical_success", o.empirical_success},
                       {"guaranteed_success", o.guaranteed_success},
                       {"passed", o.passed},
                       {"wilson_halfwidth", o.wilson_halfwidth},
                       {"success_count", o.success_count},
                       {"trial_count", o.trial_count},
                       {"expected_fail", o.expected_fail},
                       {"vacuous", o.vacuous},
                       {"elapsed_seconds", o.elapsed_seconds}});
    }
    json root{{"all_passed", result.all_passed}, {"trials", arr}};
    return root.dump(2) + "\n";
}

std::string outcomes_to_csv(const SuiteResult& result) {
    std::ostringstream os;
    os.precision(17);
    os << "label,theorem,empirical_success,guaranteed_success,passed,"
          "wilson_halfwidth,success_count,trial_count,expected_fail,vacuous,"
          "elapsed_seconds\n";
    for (const auto& o : result.outcomes) {
        os << o.label << "," << theorem_name(o.theorem_id) << ","
           << o.empirical_success << "," << o.guaranteed_success << ","
           << (o.passed ? 1 : 0) << "," << o.wilson_halfwidth << ","
           << o.success_count << "," << o.trial_count << ","
           << (o.expected_fail ? 1 : 0) << "," << (o.vacuous ? 1 : 0) << ","
           << o.elapsed_seconds << "\n";
    }
    return os.str();
}

}  // namespace poisonmark
