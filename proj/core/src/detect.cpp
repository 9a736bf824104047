#include "poisonmark/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "poisonmark/parallel.hpp"

namespace poisonmark {

namespace {

constexpr std::size_t kPairwiseBase = 64;

double pairwise_sum_impl(const double* v, std::size_t n) {
    if (n <= kPairwiseBase) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_impl(v, half) + pairwise_sum_impl(v + half, n - half);
}

double pairwise_dot_impl(const double* a, const double* b, std::size_t n) {
    if (n <= kPairwiseBase) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_dot_impl(a, b, half) +
           pairwise_dot_impl(a + half, b + half, n - half);
}

double pairwise_dot_key_impl(const std::int8_t* k, const double* b,
                             std::size_t n) {
    if (n <= kPairwiseBase) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(k[i]) * b[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_dot_key_impl(k, b, half) +
           pairwise_dot_key_impl(k + half, b + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    return pairwise_sum_impl(values.data(), values.size());
}

double pairwise_dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot product length mismatch: " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    return pairwise_dot_impl(a.data(), b.data(), a.size());
}

double score(const Key& key, std::span<const double> row) {
    if (key.dim != row.size()) {
        throw ShapeError("key dimension " + std::to_string(key.dim) +
                         " does not match row length " +
                         std::to_string(row.size()));
    }
    return pairwise_dot_key_impl(key.entries.data(), row.data(), row.size());
}

double default_threshold(std::size_t q, double eps_w, Scheme scheme) {
    (void)scheme;  // midpoint is q*eps_w/2 for both families
    if (q == 0) throw ArgumentError("threshold needs q >= 1");
    return 0.5 * static_cast<double>(q) * eps_w;
}

std::pair<double, double> separation_constants(Scheme scheme, std::size_t q,
                                               double eps_w) {
    const double qe = static_cast<double>(q) * eps_w;
    switch (scheme) {
        case Scheme::sample_wise_post:
        case Scheme::sample_wise_concurrent:
            return {0.75 * qe, 0.25 * qe};
        case Scheme::universal_post:
            return {0.5 * qe, 0.25 * qe};
        case Scheme::universal_concurrent:
            return {(2.0 / 3.0) * qe, (1.0 / 3.0) * qe};
    }
    throw ArgumentError("unknown scheme");
}

std::vector<DetectionResult> classify(const Key& key, const DataMatrix& rows,
                                      double tau) {
    if (rows.dim() != key.dim) {
        throw ShapeError("dataset dimension does not match key");
    }
    std::vector<DetectionResult> out(rows.n_samples());
    parallel_for(rows.n_samples(), 0, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double v = score(key, rows.row(i));
            out[i] = DetectionResult{v, tau, v > tau, std::nullopt};
        }
    });
    return out;
}

std::vector<DetectionResult> classify_sample_wise(
    const DimensionPartition& partition, KeyMode mode, Seed128 master_seed,
    const DataMatrix& rows, std::span<const std::string> ids, double tau) {
    if (rows.dim() != partition.dim) {
        throw ShapeError("dataset dimension does not match partition");
    }
    if (ids.size() != rows.n_samples()) {
        throw ArgumentError("sample-wise detection needs one id per row");
    }
    std::vector<DetectionResult> out(rows.n_samples());
    parallel_for(rows.n_samples(), 0, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Key key =
                sample_wise_key_stream(partition, mode, master_seed, ids[i]);
            const double v = score(key, rows.row(i));
            out[i] = DetectionResult{v, tau, v > tau, ids[i]};
        }
    });
    return out;
}

double auroc(std::span<const double> pos_scores,
             std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty()) {
        throw ArgumentError("auroc needs non-empty positive and negative lists");
    }
    const std::size_t n_pos = pos_scores.size();
    const std::size_t n_neg = neg_scores.size();
    struct Entry {
        double value;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(n_pos + n_neg);
    for (const double v : pos_scores) all.push_back({v, true});
    for (const double v : neg_scores) all.push_back({v, false});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.value < b.value; });

    // Midranks over ties, rank sum of positives.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].value == all[i].value) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].positive) rank_sum_pos += midrank;
        }
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                        static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

SeparationReport separation_report(const Key& key, const DataMatrix& pos,
                                   const DataMatrix& neg, std::size_t q,
                                   double eps_w, Scheme scheme) {
    if (pos.dim() != key.dim || neg.dim() != key.dim) {
        throw ShapeError("dataset dimensions do not match key");
    }
    const auto [c1, c2] = separation_constants(scheme, q, eps_w);
    std::vector<double> pos_scores(pos.n_samples());
    std::vector<double> neg_scores(neg.n_samples());
    parallel_for(pos.n_samples(), 0, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            pos_scores[i] = score(key, pos.row(i));
    });
    parallel_for(neg.n_samples(), 0, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            neg_scores[i] = score(key, neg.row(i));
    });
    SeparationReport r;
    r.n_pos = pos.n_samples();
    r.n_neg = neg.n_samples();
    r.c1 = c1;
    r.c2 = c2;
    r.auroc = auroc(pos_scores, neg_scores);
    std::size_t above = 0, below = 0;
    for (const double v : pos_scores) above += v > c1;
    for (const double v : neg_scores) below += v < c2;
    r.pos_above_c1_fraction = static_cast<double>(above) / r.n_pos;
    r.neg_below_c2_fraction = static_cast<double>(below) / r.n_neg;
    return r;
}

std::string detections_to_csv(std::span<const DetectionResult> results) {
    std::ostringstream os;
    os << "sample_id,score,decision\n";
    os.precision(17);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        os << (r.sample_id ? *r.sample_id : std::to_string(i)) << ","
           << r.score << "," << (r.decision ? 1 : 0) << "\n";
    }
    return os.str();
}

std::string separation_report_to_json(const SeparationReport& report) {
    nlohmann::json j{{"n_pos", report.n_pos},
                     {"n_neg", report.n_neg},
                     {"auroc", report.auroc},
                     {"pos_above_c1_fraction", report.pos_above_c1_fraction},
                     {"neg_below_c2_fraction", report.neg_below_c2_fraction},
                     {"c1", report.c1},
                     {"c2", report.c2}};
    return j.dump(2) + "\n";
}

}  // namespace poisonmark
