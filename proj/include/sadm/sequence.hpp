#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sadm/rng.hpp"
#include "sadm/tensor.hpp"

namespace sadm {

// A length-L sequence of WxHxD scalar volumes with a per-frame presence
// mask. Present frames are Min-Max normalized to [0,1]; absent frames are
// stored as exact zeros.
struct LongitudinalVolume {
    std::vector<Tensor> frames;
    std::vector<bool> present;

    std::int64_t length() const { return static_cast<std::int64_t>(frames.size()); }
    const Shape& frame_shape() const { return frames.at(0).shape; }
};

// (C, M, F) split of 1-based frame indices: conditioning (observed),
// missing (unobserved interior), future (unobserved, after everything
// observed or missing).
struct IndexPartition {
    std::vector<int> cond;
    std::vector<int> missing;
    std::vector<int> future;

    bool is_cond(int i) const;
};

// Returns a description of the first violated rule, or nullopt when the
// partition is valid for sequence length L.
std::optional<std::string> validate_partition(const IndexPartition& p, int L);

struct MaskedSequence {
    std::vector<Tensor> frames;  // length upto-1; zero volume at non-C slots
    std::vector<bool> mask;      // true where a real conditioning frame sits
};

// Prefix X~ of length upto-1: position k (1-based) holds the next
// conditioning frame in queue order if k is in C, else the zero volume.
MaskedSequence build_masked_sequence(const LongitudinalVolume& v, const IndexPartition& p, int upto);

// Uniform draw from M union F.
int sample_training_target(const IndexPartition& p, Rng& rng);

// Random valid partition for training: |C| ~ U{1..L-1} with 1 forced into C,
// remaining C uniform over {2..L}, complement split at a uniform pivot so
// every M index precedes every F index.
IndexPartition random_partition(int L, Rng& rng);

}  // namespace sadm
