#include "poisonmark/types.hpp"

#include <cmath>

namespace poisonmark {

bool scheme_is_concurrent(Scheme s) {
    return s == Scheme::sample_wise_concurrent || s == Scheme::universal_concurrent;
}

bool scheme_is_sample_wise(Scheme s) {
    return s == Scheme::sample_wise_post || s == Scheme::sample_wise_concurrent;
}

PartitionMode scheme_partition_mode(Scheme s) {
    return scheme_is_concurrent(s) ? PartitionMode::concurrent : PartitionMode::post;
}

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::sample_wise_post: return "sample-wise-post";
        case Scheme::sample_wise_concurrent: return "sample-wise-concurrent";
        case Scheme::universal_post: return "universal-post";
        case Scheme::universal_concurrent: return "universal-concurrent";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "sample-wise-post") return Scheme::sample_wise_post;
    if (name == "sample-wise-concurrent") return Scheme::sample_wise_concurrent;
    if (name == "universal-post") return Scheme::universal_post;
    if (name == "universal-concurrent") return Scheme::universal_concurrent;
    throw ArgumentError("unknown scheme '" + name + "'");
}

DataMatrix DataMatrix::validated(std::size_t n_samples, std::size_t dim,
                                 std::vector<double> values,
                                 std::optional<std::vector<std::int64_t>> labels) {
    if (n_samples == 0 || dim == 0) {
        throw ArgumentError("DataMatrix requires n_samples >= 1 and dim >= 1");
    }
    if (values.size() != n_samples * dim) {
        throw ShapeError("DataMatrix value buffer has " +
                         std::to_string(values.size()) + " entries, expected " +
                         std::to_string(n_samples * dim));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!std::isfinite(v)) {
            throw NumericError("non-finite value at (row " +
                               std::to_string(i / dim) + ", col " +
                               std::to_string(i % dim) + ")");
        }
        if (v < 0.0 || v > 1.0) {
            throw RangeError("value " + std::to_string(v) +
                             " outside [0,1] at (row " + std::to_string(i / dim) +
                             ", col " + std::to_string(i % dim) + ")");
        }
    }
    if (labels && labels->size() != n_samples) {
        throw ShapeError("label count " + std::to_string(labels->size()) +
                         " does not match n_samples " + std::to_string(n_samples));
    }
    return unchecked(n_samples, dim, std::move(values), std::move(labels));
}

DataMatrix DataMatrix::unchecked(std::size_t n_samples, std::size_t dim,
                                 std::vector<double> values,
                                 std::optional<std::vector<std::int64_t>> labels) {
    DataMatrix m;
    m.n_ = n_samples;
    m.d_ = dim;
    m.values_ = std::move(values);
    m.labels_ = std::move(labels);
    return m;
}

DataMatrix validate_matrix(std::size_t n_samples, std::size_t dim,
                           std::vector<double> values,
                           std::optional<std::vector<std::int64_t>> labels) {
    return DataMatrix::validated(n_samples, dim, std::move(values),
                                 std::move(labels));
}

void BudgetConfig::validate() const {
    if (!(eps_w > 0.0 && eps_w <= 1.0)) {
        throw ArgumentError("eps_w must be in (0, 1], got " + std::to_string(eps_w));
    }
    if (!(eps_p >= 0.0 && eps_p <= 1.0)) {
        throw ArgumentError("eps_p must be in [0, 1], got " + std::to_string(eps_p));
    }
    if (!(omega > 0.0 && omega < 0.5)) {
        throw ArgumentError("omega must be in (0, 0.5), got " + std::to_string(omega));
    }
}

PerturbedMatrix::PerturbedMatrix(const DataMatrix& base, std::vector<double> delta,
                                 ClipMode mode, double clipped_fraction)
    : base_(&base),
      delta_(std::move(delta)),
      mode_(mode),
      clipped_fraction_(clipped_fraction) {
    if (delta_.size() != base.n_samples() * base.dim()) {
        throw ShapeError("delta size does not match base matrix");
    }
    if (mode_ == ClipMode::strict && clipped_fraction_ != 0.0) {
        throw ArgumentError("strict mode cannot report a clipped fraction");
    }
}

std::vector<double> PerturbedMatrix::row(std::size_t i) const {
    const std::size_t d = base_->dim();
    std::vector<double> out(d);
    const auto base_row = base_->row(i);
    for (std::size_t j = 0; j < d; ++j) {
        out[j] = base_row[j] + delta_[i * d + j];
    }
    return out;
}

DataMatrix PerturbedMatrix::materialize() const {
    const std::size_t n = base_->n_samples();
    const std::size_t d = base_->dim();
    std::vector<double> values(n * d);
    const auto& base_values = base_->values();
    for (std::size_t i = 0; i < n * d; ++i) {
        values[i] = base_values[i] + delta_[i];
    }
    std::optional<std::vector<std::int64_t>> labels;
    if (base_->has_labels()) labels = base_->labels();
    return DataMatrix::unchecked(n, d, std::move(values), std::move(labels));
}

}  // namespace poisonmark
