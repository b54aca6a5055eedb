#include <doctest.h>

#include <cmath>
#include <map>

#include "sadm/sequence.hpp"

using namespace sadm;

namespace {

LongitudinalVolume make_seq(int L, const Shape& shape = {2, 2, 2}) {
    LongitudinalVolume v;
    for (int i = 1; i <= L; ++i) {
        v.frames.push_back(Tensor::full(shape, static_cast<double>(i)));
        v.present.push_back(true);
    }
    return v;
}

}  // namespace

TEST_CASE("partition validation rules") {
    CHECK(!validate_partition({{1, 3}, {2}, {4, 5, 6}}, 6));
    CHECK(!validate_partition({{1, 2, 3, 4, 5, 6}, {}, {}}, 6));

    auto why = validate_partition({{2, 3}, {1}, {4}}, 4);
    REQUIRE(why);
    CHECK(why->find("c1 != 1") != std::string::npos);

    why = validate_partition({{1}, {3}, {2}}, 3);
    REQUIRE(why);
    CHECK(why->find("F not strictly after M") != std::string::npos);

    why = validate_partition({{1, 4}, {}, {2, 3}}, 4);
    REQUIRE(why);
    CHECK(why->find("F not strictly after C") != std::string::npos);

    CHECK(validate_partition({{1}, {2}, {2}}, 3));    // not disjoint
    CHECK(validate_partition({{1}, {}, {2}}, 3));     // incomplete
    CHECK(validate_partition({{1, 7}, {}, {}}, 3));   // out of range
    CHECK(validate_partition({{3, 1}, {}, {2}}, 3));  // unsorted
}

TEST_CASE("masked sequence construction") {
    LongitudinalVolume v = make_seq(6);

    SUBCASE("full prefix") {
        IndexPartition p{{1, 2, 3}, {}, {4, 5, 6}};
        MaskedSequence ms = build_masked_sequence(v, p, 4);
        REQUIRE(ms.frames.size() == 3);
        CHECK(ms.mask == std::vector<bool>{true, true, true});
        CHECK(ms.frames[0][0] == 1.0);
        CHECK(ms.frames[1][0] == 2.0);
        CHECK(ms.frames[2][0] == 3.0);
    }
    SUBCASE("zero tensor at missing slots") {
        IndexPartition p{{1, 3}, {2}, {4, 5, 6}};
        MaskedSequence ms = build_masked_sequence(v, p, 4);
        REQUIRE(ms.frames.size() == 3);
        CHECK(ms.mask == std::vector<bool>{true, false, true});
        CHECK(ms.frames[0][0] == 1.0);
        for (double x : ms.frames[1].data) CHECK(x == 0.0);
        CHECK(ms.frames[2][0] == 3.0);
    }
    SUBCASE("single-image setting") {
        IndexPartition p{{1}, {}, {2, 3, 4, 5, 6}};
        MaskedSequence ms = build_masked_sequence(v, p, 2);
        REQUIRE(ms.frames.size() == 1);
        CHECK(ms.mask == std::vector<bool>{true});
        CHECK(ms.frames[0][0] == 1.0);
    }
    SUBCASE("upto bounds") {
        IndexPartition p{{1}, {}, {2, 3, 4, 5, 6}};
        CHECK_THROWS(build_masked_sequence(v, p, 1));
        CHECK_THROWS(build_masked_sequence(v, p, 7));
    }
}

TEST_CASE("training target sampling") {
    Rng rng(4);
    SUBCASE("singleton pool") {
        IndexPartition p{{1, 3}, {2}, {}};
        for (int i = 0; i < 20; ++i) CHECK(sample_training_target(p, rng) == 2);
    }
    SUBCASE("uniform over the pool") {
        IndexPartition p{{1, 2, 3}, {}, {4, 5, 6}};
        std::map<int, int> hist;
        const int n = 10000;
        for (int i = 0; i < n; ++i) ++hist[sample_training_target(p, rng)];
        // multinomial: each bucket within 3 sigma of n/3
        const double mean = n / 3.0, sd = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
        for (int f : {4, 5, 6}) CHECK(std::abs(hist[f] - mean) < 3 * sd);
    }
    SUBCASE("empty pool is an error") {
        IndexPartition p{{1, 2}, {}, {}};
        CHECK_THROWS(sample_training_target(p, rng));
    }
}

TEST_CASE("random partitions are always valid and cover sizes") {
    Rng rng(8);
    const int L = 6;
    std::map<std::size_t, int> csizes;
    for (int i = 0; i < 5000; ++i) {
        IndexPartition p = random_partition(L, rng);
        auto why = validate_partition(p, L);
        if (why) FAIL("invalid random partition: ", *why);
        ++csizes[p.cond.size()];
    }
    for (std::size_t k = 1; k <= 5; ++k) CHECK(csizes[k] > 0);
    CHECK_THROWS(random_partition(1, rng));
}
