#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisonmark/rng.hpp"
#include "poisonmark/types.hpp"

namespace poisonmark {

// Desk-scale two-blob binary classification task in [0,1]^d with labels
// in {-1, +1}: a stand-in for the image benchmarks at a size where full
// sweeps run in minutes.
struct ToyTaskParams {
    std::size_t d = 256;
    std::size_t n_train = 2000;
    std::size_t n_test = 1000;
    double noise_scale = 0.05;
    double class_sep = 0.015;  // per-dimension mean gap between the classes
    Seed128 seed;
};

struct ToyTask {
    std::size_t d = 0;
    std::vector<double> class_means;  // 2 x d; row 0 = label -1, row 1 = label +1
    double noise_scale = 0.0;
    Seed128 seed;
    DataMatrix train;
    DataMatrix test;
    bool degenerate_means = false;  // equal means: generated, but flagged
};

ToyTask gen_toy_task(const ToyTaskParams& params);

// Class-conditional fixed pattern of magnitude eps_p supported on `dims`:
// rows of class y get y * eps_p * r, a linear shortcut perfectly predictive
// of the label. The pattern points against the class-mean gap
// (error-minimizing), so the shortcut also counteracts the true features.
// Returns an n_train x d delta.
std::vector<double> toy_availability_poison(const ToyTask& task, double eps_p,
                                            std::span<const std::size_t> dims,
                                            Seed128 seed);

// Same construction for an arbitrary labeled dataset, using empirical
// per-class means (the CLI path).
std::vector<double> availability_poison_rows(const DataMatrix& train,
                                             double eps_p,
                                             std::span<const std::size_t> dims,
                                             Seed128 seed);

// Clean-label trigger delta for an arbitrary labeled dataset; no test set.
struct BackdoorDelta {
    std::vector<double> train_delta;
    std::vector<std::size_t> poisoned_rows;
    std::vector<double> trigger;  // d-length pattern
};
BackdoorDelta backdoor_poison_rows(const DataMatrix& train, double eps_p,
                                   std::span<const std::size_t> trigger_dims,
                                   std::int64_t target_label, double poison_rate,
                                   Seed128 seed);

struct BackdoorPoison {
    std::vector<double> train_delta;      // n_train x d, clean-label trigger
    DataMatrix triggered_test;            // clean test + trigger on all rows
    std::vector<std::size_t> poisoned_rows;
    std::vector<std::size_t> trigger_dims;
};

// Additive trigger of magnitude eps_p on trigger_dims applied to a fraction
// poison_rate of target-class training rows; the triggered test set carries
// the trigger on every row.
BackdoorPoison toy_backdoor_poison(const ToyTask& task, double eps_p,
                                   std::span<const std::size_t> trigger_dims,
                                   std::int64_t target_label, double poison_rate,
                                   Seed128 seed);

// L-layer feed-forward net F(x) = W^L (1/sqrt(d_{L-1})) ReLU(... ReLU(W^1 x
// + b^1) ...) + b^L with Xavier-uniform init.
struct ToyModel {
    std::vector<std::size_t> widths;           // d_0 .. d_L, d_L == 1
    std::vector<std::vector<double>> weights;  // row-major d_l x d_{l-1}
    std::vector<std::vector<double>> biases;

    std::size_t layer_count() const { return weights.size(); }
    double forward(std::span<const double> x) const;
};

ToyModel init_toy_model(std::span<const std::size_t> widths, Seed128 seed);

struct TrainConfig {
    std::vector<std::size_t> hidden = {64};
    std::size_t epochs = 40;
    std::size_t batch_size = 100;
    double learning_rate = 0.1;
    double momentum = 0.9;
    bool cosine_decay = true;
    Seed128 seed;
};

struct TrainResult {
    ToyModel model;
    double final_train_loss = 0.0;
    double initial_train_loss = 0.0;
};

// Deterministic given the config seed; throws on a non-finite loss with the
// epoch index in the message.
TrainResult train(const DataMatrix& train_data, const TrainConfig& config);

// Mean logistic loss of the model over a labeled dataset.
double mean_loss(const ToyModel& model, const DataMatrix& data);

struct EvalResult {
    double accuracy = 0.0;
    std::optional<double> attack_success_rate;
};

// accuracy = fraction with sign(F(x)) == y; ASR = fraction of triggered rows
// classified as target_label.
EvalResult evaluate(const ToyModel& model, const DataMatrix& test,
                    const DataMatrix* triggered = nullptr,
                    std::int64_t target_label = 1);

// Central finite differences at `probes` random parameters; returns the
// maximum relative error against the analytic gradient.
double gradient_check(const DataMatrix& data, const TrainConfig& config,
                      std::size_t probes, Seed128 seed);

enum class AttackKind { availability, backdoor };
std::string attack_name(AttackKind a);
AttackKind attack_from_name(const std::string& name);

struct SweepConfig {
    ToyTaskParams task;
    AttackKind attack = AttackKind::availability;
    Scheme scheme = Scheme::universal_concurrent;
    std::vector<std::size_t> q_values;  // q = 0 is the unwatermarked baseline
    double eps_w = 3.0 / 255.0;
    double eps_p = 8.0 / 255.0;
    std::vector<Seed128> seeds;
    TrainConfig train;
    std::size_t trigger_dim_count = 128;  // backdoor
    std::int64_t target_label = 1;
    double poison_rate = 0.1;
};

struct SweepCell {
    std::size_t q = 0;
    Seed128 seed;
    double auroc = 0.0;  // meaningless at q = 0 (no key); has_auroc = false
    bool has_auroc = false;
    double clean_accuracy = 0.0;
    double attack_success_rate = 0.0;
    bool has_asr = false;
    double train_loss = 0.0;
    double clipped_fraction = 0.0;
};

struct TrendReport {
    Scheme scheme = Scheme::universal_concurrent;
    AttackKind attack = AttackKind::availability;
    std::vector<std::size_t> q_values;
    std::size_t seeds_used = 0;
    std::vector<SweepCell> cells;        // one per (q, seed), q-major order
    std::vector<double> auroc_per_q;     // seed means; NaN where undefined
    std::vector<double> clean_acc_per_q;
    std::vector<double> asr_per_q;       // backdoor only

    std::string to_csv() const;
    std::string to_json() const;
};

// For each (q, seed): partition, poison (restricted to P in concurrent
// mode), watermark, train, evaluate, detect. Cells run in parallel and the
// report is identical to a sequential run.
TrendReport q_sweep(const SweepConfig& config, std::size_t threads = 0);

// Spearman rank correlation with midranks; used for trend checks.
double spearman_rho(std::span<const double> x, std::span<const double> y);

}  // namespace poisonmark
