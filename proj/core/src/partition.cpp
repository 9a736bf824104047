#include "poisonmark/partition.hpp"

#include <algorithm>
#include <numeric>

namespace poisonmark {

void DimensionPartition::validate() const {
    if (dim == 0) throw ArgumentError("partition dimension must be >= 1");
    if (watermark_dims.empty() || watermark_dims.size() > dim) {
        throw ArgumentError("invalid watermark length q = " +
                            std::to_string(watermark_dims.size()) + " for d = " +
                            std::to_string(dim));
    }
    if (!std::is_sorted(watermark_dims.begin(), watermark_dims.end())) {
        throw ArgumentError("watermark dims must be sorted ascending");
    }
    for (std::size_t i = 0; i < watermark_dims.size(); ++i) {
        if (watermark_dims[i] >= dim) {
            throw ArgumentError("watermark dim index " +
                                std::to_string(watermark_dims[i]) +
                                " out of range [0, " + std::to_string(dim) + ")");
        }
        if (i > 0 && watermark_dims[i] == watermark_dims[i - 1]) {
            throw ArgumentError("duplicate watermark dim index " +
                                std::to_string(watermark_dims[i]));
        }
    }
}

namespace {

std::vector<std::size_t> complement(std::size_t d,
                                    const std::vector<std::size_t>& sorted_w) {
    std::vector<std::size_t> out;
    out.reserve(d - sorted_w.size());
    std::size_t next = 0;
    for (std::size_t j = 0; j < d; ++j) {
        if (next < sorted_w.size() && sorted_w[next] == j) {
            ++next;
        } else {
            out.push_back(j);
        }
    }
    return out;
}

std::vector<std::size_t> full_range(std::size_t d) {
    std::vector<std::size_t> out(d);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
}

}  // namespace

DimensionPartition make_partition(std::size_t d, std::size_t q, Seed128 seed,
                                  PartitionMode mode) {
    if (q == 0) throw ArgumentError("invalid watermark length q = 0");
    if (q > d) {
        throw ArgumentError("invalid watermark length q = " + std::to_string(q) +
                            " exceeds d = " + std::to_string(d));
    }
    // Partial Fisher-Yates: first q entries of a seeded shuffle of [0, d).
    std::vector<std::size_t> pool = full_range(d);
    Rng rng(seed);
    for (std::size_t i = 0; i < q; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> w(pool.begin(), pool.begin() + q);
    std::sort(w.begin(), w.end());
    return partition_from_dims(d, std::move(w), mode);
}

DimensionPartition partition_from_dims(std::size_t d,
                                       std::vector<std::size_t> watermark_dims,
                                       PartitionMode mode) {
    std::sort(watermark_dims.begin(), watermark_dims.end());
    watermark_dims.erase(
        std::unique(watermark_dims.begin(), watermark_dims.end()),
        watermark_dims.end());
    DimensionPartition p;
    p.dim = d;
    p.watermark_dims = std::move(watermark_dims);
    p.mode = mode;
    p.validate();
    p.poison_dims = (mode == PartitionMode::concurrent)
                        ? complement(d, p.watermark_dims)
                        : full_range(d);
    return p;
}

}  // namespace poisonmark
