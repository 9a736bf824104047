#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisonmark/error.hpp"

namespace poisonmark {

// How perturbed values are kept inside [0,1].
//   strict: never clamp; adding a delta that leaves [0,1] is an error.
//           Certification default: the guarantee analysis never clamps.
//   clip:   clamp into [0,1] and record the fraction of clamped entries.
//           Production default for real pixel-like data.
enum class ClipMode { strict, clip };

// Watermarking schemes. "post" watermarks an already-poisoned dataset
// (supports may overlap); "concurrent" confines the poison to P = [d] \ W.
enum class Scheme {
    sample_wise_post,
    sample_wise_concurrent,
    universal_post,
    universal_concurrent,
};

// Partition flavor; concurrent mode forces P = [d] \ W.
enum class PartitionMode { post, concurrent };

bool scheme_is_concurrent(Scheme s);
bool scheme_is_sample_wise(Scheme s);
PartitionMode scheme_partition_mode(Scheme s);
std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

// N x d row-major dataset with values in [0,1] and optional +-1 labels.
class DataMatrix {
public:
    DataMatrix() = default;

    // Validates shape and range; throws RangeError / NumericError with the
    // first offending (row, col).
    static DataMatrix validated(std::size_t n_samples, std::size_t dim,
                                std::vector<double> values,
                                std::optional<std::vector<std::int64_t>> labels =
                                    std::nullopt);

    // Trusted constructor for values already known to be in range.
    static DataMatrix unchecked(std::size_t n_samples, std::size_t dim,
                                std::vector<double> values,
                                std::optional<std::vector<std::int64_t>> labels =
                                    std::nullopt);

    std::size_t n_samples() const { return n_; }
    std::size_t dim() const { return d_; }

    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * d_, d_};
    }
    const std::vector<double>& values() const { return values_; }
    bool has_labels() const { return labels_.has_value(); }
    const std::vector<std::int64_t>& labels() const { return *labels_; }

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<double> values_;
    std::optional<std::vector<std::int64_t>> labels_;
};

// validate_matrix over a flat row-major buffer.
DataMatrix validate_matrix(std::size_t n_samples, std::size_t dim,
                           std::vector<double> values,
                           std::optional<std::vector<std::int64_t>> labels =
                               std::nullopt);

// Perturbation budgets and the failure probability knob.
struct BudgetConfig {
    double eps_w = 0.0;  // watermark budget, L-infinity, in (0, 1]
    double eps_p = 0.0;  // poison budget, L-infinity, in [0, 1]
    double omega = 0.0;  // failure probability, in (0, 0.5)

    void validate() const;
};

// A dataset plus a per-entry delta. In strict mode the delta never moved any
// coordinate outside [0,1]; in clip mode deltas are stored post-clamp so
// base + delta is always in range, and clipped_fraction records how many
// entries the clamp changed.
class PerturbedMatrix {
public:
    PerturbedMatrix(const DataMatrix& base, std::vector<double> delta,
                    ClipMode mode, double clipped_fraction);

    const DataMatrix& base() const { return *base_; }
    const std::vector<double>& delta() const { return delta_; }
    ClipMode clip_mode() const { return mode_; }
    double clipped_fraction() const { return clipped_fraction_; }

    std::size_t n_samples() const { return base_->n_samples(); }
    std::size_t dim() const { return base_->dim(); }

    // base + delta for one row.
    std::vector<double> row(std::size_t i) const;
    // base + delta as a full matrix (labels carried over).
    DataMatrix materialize() const;

private:
    const DataMatrix* base_;
    std::vector<double> delta_;
    ClipMode mode_;
    double clipped_fraction_;
};

// Poison generator selector used by the CLI and the toy lab.
enum class PoisonKind { random, toy_availability, toy_backdoor };

struct PoisonPlan {
    double eps_p = 0.0;
    std::vector<std::size_t> dims;  // allowed support
    PoisonKind kind = PoisonKind::random;
    // Backdoor extras (ignored for other kinds).
    std::int64_t target_label = 1;
    double poison_rate = 0.1;
};

}  // namespace poisonmark
