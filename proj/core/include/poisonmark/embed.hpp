#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "poisonmark/keying.hpp"
#include "poisonmark/partition.hpp"
#include "poisonmark/types.hpp"

namespace poisonmark {

// Key material for a plan: a fixed key for universal schemes, or a master
// seed from which per-sample keys are derived for sample-wise schemes.
struct KeyStream {
    Seed128 master_seed;
};

struct WatermarkPlan {
    Scheme scheme = Scheme::universal_post;
    BudgetConfig budget;
    DimensionPartition partition;
    std::variant<Key, KeyStream> key_source;

    void validate() const;
    // The key used for a given row; sample_id required for sample-wise schemes.
    Key key_for(const std::optional<std::string>& sample_id = std::nullopt) const;
};

// delta^w = eps_w * sign(zeta) restricted to W, zero elsewhere.
// The infinity norm is exactly eps_w.
std::vector<double> craft_watermark(const WatermarkPlan& plan,
                                    const std::optional<std::string>& sample_id =
                                        std::nullopt);

// Watermark an already-poisoned dataset (Post-Poisoning Watermarking).
// `ids` is required for sample-wise schemes and must have one id per row.
PerturbedMatrix embed_post_poisoning(const DataMatrix& poisoned,
                                     const WatermarkPlan& plan, ClipMode clip,
                                     std::span<const std::string> ids = {});

// Poison and watermark together on disjoint supports
// (Poisoning-Concurrent Watermarking). `poison_rows` is an n x d row-major
// delta whose support must stay inside the plan's poison dimensions P;
// any mass on W is a partition violation.
PerturbedMatrix embed_poisoning_concurrent(const DataMatrix& clean,
                                           std::span<const double> poison_rows,
                                           const WatermarkPlan& plan,
                                           ClipMode clip,
                                           std::span<const std::string> ids = {});

// Entries i.i.d. uniform on [-eps_p, eps_p] on `dims`, zero elsewhere.
std::vector<double> random_poison(std::size_t d, double eps_p,
                                  std::span<const std::size_t> dims, Seed128 seed);

// n rows of random poison; row i uses an independent seed derived from
// (seed, i) so parallel generation matches sequential output.
std::vector<double> random_poison_matrix(std::size_t n, std::size_t d,
                                         double eps_p,
                                         std::span<const std::size_t> dims,
                                         Seed128 seed);

}  // namespace poisonmark
