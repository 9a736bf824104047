#pragma once

#include <cstddef>
#include <vector>

#include "poisonmark/rng.hpp"
#include "poisonmark/types.hpp"

namespace poisonmark {

// Watermark dimensions W (sorted, duplicate-free) and poison dimensions P.
// In concurrent mode P = [d] \ W; in post mode P = [d] and may overlap W.
struct DimensionPartition {
    std::size_t dim = 0;
    std::vector<std::size_t> watermark_dims;
    std::vector<std::size_t> poison_dims;
    PartitionMode mode = PartitionMode::post;

    std::size_t q() const { return watermark_dims.size(); }
    void validate() const;
};

// W is a uniformly random q-subset of [d], deterministic given the seed.
DimensionPartition make_partition(std::size_t d, std::size_t q, Seed128 seed,
                                  PartitionMode mode);

// Partition with an explicit W (sorted/deduplicated here).
DimensionPartition partition_from_dims(std::size_t d,
                                       std::vector<std::size_t> watermark_dims,
                                       PartitionMode mode);

}  // namespace poisonmark
