#include "sadm/sequence.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace sadm {

bool IndexPartition::is_cond(int i) const {
    return std::find(cond.begin(), cond.end(), i) != cond.end();
}

std::optional<std::string> validate_partition(const IndexPartition& p, int L) {
    auto sorted = [](const std::vector<int>& v) { return std::is_sorted(v.begin(), v.end()); };
    if (!sorted(p.cond) || !sorted(p.missing) || !sorted(p.future))
        return "index lists must be in ascending order";
    std::set<int> all;
    std::size_t total = 0;
    for (const auto* lst : {&p.cond, &p.missing, &p.future}) {
        total += lst->size();
        all.insert(lst->begin(), lst->end());
    }
    if (all.size() != total) return "C, M, F must be pairwise disjoint";
    if (static_cast<int>(total) != L)
        return "|C|+|M|+|F| = " + std::to_string(total) + " but L = " + std::to_string(L);
    for (int i : all)
        if (i < 1 || i > L) return "index " + std::to_string(i) + " outside 1.." + std::to_string(L);
    if (p.cond.empty() || p.cond.front() != 1) return "c1 != 1 (first frame must be conditioning)";
    if (!p.future.empty()) {
        const int f_min = p.future.front();
        for (int c : p.cond)
            if (c > f_min) return "F not strictly after C";
        for (int m : p.missing)
            if (m > f_min) return "F not strictly after M";
    }
    return std::nullopt;
}

MaskedSequence build_masked_sequence(const LongitudinalVolume& v, const IndexPartition& p, int upto) {
    const int L = static_cast<int>(v.length());
    if (upto < 2 || upto > L)
        throw std::invalid_argument("build_masked_sequence: upto = " + std::to_string(upto) +
                                    " outside 2.." + std::to_string(L));
    if (auto why = validate_partition(p, L))
        throw std::invalid_argument("build_masked_sequence: invalid partition: " + *why);
    MaskedSequence out;
    const Tensor zero = Tensor::zeros(v.frame_shape());
    std::size_t next_c = 0;  // queue semantics: consume conditioning frames in order
    for (int k = 1; k <= upto - 1; ++k) {
        if (p.is_cond(k)) {
            out.frames.push_back(v.frames[static_cast<std::size_t>(p.cond[next_c] - 1)]);
            ++next_c;
            out.mask.push_back(true);
        } else {
            out.frames.push_back(zero);
            out.mask.push_back(false);
        }
    }
    return out;
}

int sample_training_target(const IndexPartition& p, Rng& rng) {
    std::vector<int> pool = p.missing;
    pool.insert(pool.end(), p.future.begin(), p.future.end());
    if (pool.empty())
        throw std::invalid_argument("sample_training_target: M and F are both empty, nothing to learn");
    std::sort(pool.begin(), pool.end());
    return pool[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(pool.size())))];
}

IndexPartition random_partition(int L, Rng& rng) {
    if (L < 2) throw std::invalid_argument("random_partition: L must be >= 2");
    IndexPartition p;
    const int n_c = 1 + static_cast<int>(rng.uniform_int(L - 1));  // 1..L-1
    std::vector<int> rest;
    for (int i = 2; i <= L; ++i) rest.push_back(i);
    // Fisher-Yates prefix selection for the remaining conditioning indices.
    for (int k = 0; k < n_c - 1; ++k) {
        const auto j = k + rng.uniform_int(static_cast<std::int64_t>(rest.size()) - k);
        std::swap(rest[static_cast<std::size_t>(k)], rest[static_cast<std::size_t>(j)]);
    }
    p.cond.assign(rest.begin(), rest.begin() + (n_c - 1));
    p.cond.push_back(1);
    std::sort(p.cond.begin(), p.cond.end());
    std::vector<int> rem(rest.begin() + (n_c - 1), rest.end());
    std::sort(rem.begin(), rem.end());
    // Pivot so that every M precedes every F; also ensure F never reaches
    // back before a later conditioning index.
    const int max_cm = p.cond.back();
    std::size_t min_pivot = 0;
    while (min_pivot < rem.size() && rem[min_pivot] < max_cm) ++min_pivot;
    const std::size_t pivot = min_pivot + static_cast<std::size_t>(rng.uniform_int(
                                              static_cast<std::int64_t>(rem.size() - min_pivot) + 1));
    p.missing.assign(rem.begin(), rem.begin() + static_cast<std::ptrdiff_t>(pivot));
    p.future.assign(rem.begin() + static_cast<std::ptrdiff_t>(pivot), rem.end());
    return p;
}

}  // namespace sadm
