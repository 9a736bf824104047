#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisonmark/keying.hpp"
#include "poisonmark/types.hpp"

namespace poisonmark {

// Pairwise-summed sum and dot product (base case 64). Deterministic and
// accurate enough that accumulation error stays far below q*eps_w thresholds.
double pairwise_sum(std::span<const double> values);
double pairwise_dot(std::span<const double> a, std::span<const double> b);

// Detection value v = zeta^T row.
double score(const Key& key, std::span<const double> row);

// Midpoint of the scheme's separation constants; q*eps_w/2 for every scheme.
double default_threshold(std::size_t q, double eps_w, Scheme scheme);

// High/low separation constants (C1, C2) per scheme.
std::pair<double, double> separation_constants(Scheme scheme, std::size_t q,
                                               double eps_w);

struct DetectionResult {
    double score = 0.0;
    double threshold = 0.0;
    bool decision = false;  // score > threshold, strictly; ties classify 0
    std::optional<std::string> sample_id;
};

// Per-row decisions with a shared key. Rows are scored in parallel but
// results keep input order.
std::vector<DetectionResult> classify(const Key& key, const DataMatrix& rows,
                                      double tau);

// Sample-wise variant: row i is scored with the key derived for ids[i].
std::vector<DetectionResult> classify_sample_wise(
    const DimensionPartition& partition, KeyMode mode, Seed128 master_seed,
    const DataMatrix& rows, std::span<const std::string> ids, double tau);

// Probability that a random positive outranks a random negative, ties
// credited 1/2; exact rank statistic.
double auroc(std::span<const double> pos_scores,
             std::span<const double> neg_scores);

struct SeparationReport {
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    double auroc = 0.0;
    double pos_above_c1_fraction = 0.0;
    double neg_below_c2_fraction = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
};

SeparationReport separation_report(const Key& key, const DataMatrix& pos,
                                   const DataMatrix& neg, std::size_t q,
                                   double eps_w, Scheme scheme);

// CSV rows "sample_id,score,decision" with header.
std::string detections_to_csv(std::span<const DetectionResult> results);
std::string separation_report_to_json(const SeparationReport& report);

}  // namespace poisonmark
