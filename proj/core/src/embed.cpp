#include "poisonmark/embed.hpp"

#include <algorithm>
#include <cmath>

namespace poisonmark {

void WatermarkPlan::validate() const {
    budget.validate();
    partition.validate();
    const bool concurrent = scheme_is_concurrent(scheme);
    if (concurrent != (partition.mode == PartitionMode::concurrent)) {
        throw ModeError("scheme " + scheme_name(scheme) +
                        " does not match partition mode");
    }
    if (std::holds_alternative<Key>(key_source)) {
        const Key& key = std::get<Key>(key_source);
        key.validate();
        if (key.dim != partition.dim) {
            throw ShapeError("plan key dimension does not match partition");
        }
        if (concurrent != (key.mode == KeyMode::concurrent)) {
            throw ModeError("key mode does not match scheme " + scheme_name(scheme));
        }
    } else if (!scheme_is_sample_wise(scheme)) {
        throw ModeError("universal schemes need a fixed key, not a key stream");
    }
}

Key WatermarkPlan::key_for(const std::optional<std::string>& sample_id) const {
    if (std::holds_alternative<Key>(key_source)) {
        return std::get<Key>(key_source);
    }
    if (!sample_id) {
        throw ArgumentError("sample_id required for sample-wise scheme " +
                            scheme_name(scheme));
    }
    const auto& stream = std::get<KeyStream>(key_source);
    const KeyMode mode = scheme_is_concurrent(scheme) ? KeyMode::concurrent
                                                      : KeyMode::identical;
    return sample_wise_key_stream(partition, mode, stream.master_seed, *sample_id);
}

std::vector<double> craft_watermark(const WatermarkPlan& plan,
                                    const std::optional<std::string>& sample_id) {
    plan.validate();
    if (scheme_is_sample_wise(plan.scheme) && !sample_id) {
        throw ArgumentError("sample_id required for sample-wise scheme " +
                            scheme_name(plan.scheme));
    }
    const Key key = plan.key_for(sample_id);
    std::vector<double> delta(plan.partition.dim, 0.0);
    const double eps = plan.budget.eps_w;
    for (const std::size_t j : plan.partition.watermark_dims) {
        delta[j] = key.entries[j] >= 0 ? eps : -eps;
    }
    return delta;
}

namespace {

struct ClipAccumulator {
    ClipMode mode;
    std::size_t clipped = 0;

    // Applies the mode to base + delta, returning the final delta entry.
    double apply(double base, double delta, std::size_t row, std::size_t col) {
        const double v = base + delta;
        if (v < 0.0 || v > 1.0) {
            if (mode == ClipMode::strict) {
                throw RangeError("strict mode: value " + std::to_string(v) +
                                 " outside [0,1] at (row " + std::to_string(row) +
                                 ", col " + std::to_string(col) + ")");
            }
            ++clipped;
            return std::clamp(v, 0.0, 1.0) - base;
        }
        return delta;
    }
};

void require_ids(const WatermarkPlan& plan, std::span<const std::string> ids,
                 std::size_t n) {
    if (!scheme_is_sample_wise(plan.scheme)) return;
    if (ids.size() != n) {
        throw ArgumentError("sample-wise scheme needs one sample id per row (" +
                            std::to_string(ids.size()) + " ids for " +
                            std::to_string(n) + " rows)");
    }
}

}  // namespace

PerturbedMatrix embed_post_poisoning(const DataMatrix& poisoned,
                                     const WatermarkPlan& plan, ClipMode clip,
                                     std::span<const std::string> ids) {
    plan.validate();
    if (scheme_is_concurrent(plan.scheme)) {
        throw ModeError("embed_post_poisoning needs a post scheme, got " +
                        scheme_name(plan.scheme));
    }
    if (poisoned.dim() != plan.partition.dim) {
        throw ShapeError("dataset dimension does not match plan");
    }
    const std::size_t n = poisoned.n_samples();
    const std::size_t d = poisoned.dim();
    require_ids(plan, ids, n);

    std::vector<double> delta(n * d, 0.0);
    ClipAccumulator acc{clip};
    const bool sample_wise = scheme_is_sample_wise(plan.scheme);
    std::vector<double> universal;
    if (!sample_wise) universal = craft_watermark(plan);

    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> wm =
            sample_wise ? craft_watermark(plan, ids[i]) : universal;
        const auto row = poisoned.row(i);
        for (const std::size_t j : plan.partition.watermark_dims) {
            delta[i * d + j] = acc.apply(row[j], wm[j], i, j);
        }
    }
    const double frac =
        static_cast<double>(acc.clipped) / static_cast<double>(n * d);
    return PerturbedMatrix(poisoned, std::move(delta), clip,
                           clip == ClipMode::strict ? 0.0 : frac);
}

PerturbedMatrix embed_poisoning_concurrent(const DataMatrix& clean,
                                           std::span<const double> poison_rows,
                                           const WatermarkPlan& plan,
                                           ClipMode clip,
                                           std::span<const std::string> ids) {
    plan.validate();
    if (!scheme_is_concurrent(plan.scheme)) {
        throw ModeError("embed_poisoning_concurrent needs a concurrent scheme");
    }
    if (clean.dim() != plan.partition.dim) {
        throw ShapeError("dataset dimension does not match plan");
    }
    const std::size_t n = clean.n_samples();
    const std::size_t d = clean.dim();
    if (poison_rows.size() != n * d) {
        throw ShapeError("poison delta must be n x d");
    }
    require_ids(plan, ids, n);

    // Poison mass on a watermark dimension breaks the disjoint-support
    // contract of the concurrent scheme.
    for (std::size_t i = 0; i < n; ++i) {
        for (const std::size_t j : plan.partition.watermark_dims) {
            if (poison_rows[i * d + j] != 0.0) {
                throw ModeError("poison support intersects watermark dims at (row " +
                                std::to_string(i) + ", col " + std::to_string(j) +
                                ")");
            }
        }
    }

    std::vector<double> delta(n * d, 0.0);
    ClipAccumulator acc{clip};
    const bool sample_wise = scheme_is_sample_wise(plan.scheme);
    std::vector<double> universal;
    if (!sample_wise) universal = craft_watermark(plan);

    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> wm =
            sample_wise ? craft_watermark(plan, ids[i]) : universal;
        const auto row = clean.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double dj = wm[j] + poison_rows[i * d + j];
            if (dj != 0.0) {
                delta[i * d + j] = acc.apply(row[j], dj, i, j);
            }
        }
    }
    const double frac =
        static_cast<double>(acc.clipped) / static_cast<double>(n * d);
    return PerturbedMatrix(clean, std::move(delta), clip,
                           clip == ClipMode::strict ? 0.0 : frac);
}

std::vector<double> random_poison(std::size_t d, double eps_p,
                                  std::span<const std::size_t> dims,
                                  Seed128 seed) {
    if (eps_p < 0.0) throw ArgumentError("eps_p must be >= 0");
    std::vector<double> out(d, 0.0);
    if (eps_p == 0.0) return out;
    Rng rng(seed);
    for (const std::size_t j : dims) {
        if (j >= d) throw ArgumentError("poison dim index out of range");
        out[j] = rng.uniform(-eps_p, eps_p);
    }
    return out;
}

std::vector<double> random_poison_matrix(std::size_t n, std::size_t d,
                                         double eps_p,
                                         std::span<const std::size_t> dims,
                                         Seed128 seed) {
    std::vector<double> out(n * d, 0.0);
    if (eps_p == 0.0) return out;
    Rng base(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(base.derive(i));
        for (const std::size_t j : dims) {
            if (j >= d) throw ArgumentError("poison dim index out of range");
            out[i * d + j] = rng.uniform(-eps_p, eps_p);
        }
    }
    return out;
}

}  // namespace poisonmark
