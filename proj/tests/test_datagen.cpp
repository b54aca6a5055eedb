#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sadm/datagen.hpp"

using namespace sadm;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const char* name) {
    return (fs::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

EllipsoidSubject default_subject() {
    EllipsoidSubject s;
    s.center = {8.0, 8.0, 4.0};
    s.base_radii = {5.0, 4.0, 2.5};
    s.contraction = 0.06;
    return s;
}

LongitudinalVolume small_subject() {
    EllipsoidSubject s;
    s.center = {4.0, 4.0, 2.0};
    s.base_radii = {2.5, 2.0, 1.2};
    s.contraction = 0.06;
    return generate_subject(s, 3, {8, 8, 4});
}

double interior_volume(const Tensor& frame) {
    double v = 0;
    for (double x : frame.data)
        if (x > 0.5) v += 1.0;
    return v;
}

}  // namespace

TEST_CASE("zero contraction keeps all frames identical") {
    EllipsoidSubject s = default_subject();
    s.contraction = 0.0;
    LongitudinalVolume v = generate_subject(s, 4, {16, 16, 8});
    for (int i = 1; i < 4; ++i)
        CHECK(v.frames[static_cast<std::size_t>(i)].data == v.frames[0].data);
}

TEST_CASE("positive contraction shrinks the interior monotonically") {
    LongitudinalVolume v = generate_subject(default_subject(), 6, {16, 16, 8});
    double prev = interior_volume(v.frames[0]);
    for (int i = 1; i < 6; ++i) {
        const double cur = interior_volume(v.frames[static_cast<std::size_t>(i)]);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("frames are min-max normalized") {
    LongitudinalVolume v = generate_subject(default_subject(), 3, {16, 16, 8});
    for (const auto& f : v.frames) {
        double lo = f[0], hi = f[0];
        for (double x : f.data) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        CHECK(lo == 0.0);
        CHECK(hi == 1.0);
    }
}

TEST_CASE("subject validation") {
    EllipsoidSubject s = default_subject();
    CHECK_NOTHROW(s.validate(6, {16, 16, 8}));
    s.contraction = 0.2;
    CHECK_THROWS(s.validate(6, {16, 16, 8}));
    s = default_subject();
    s.center = {40.0, 8.0, 4.0};
    CHECK_THROWS(s.validate(6, {16, 16, 8}));
}

TEST_CASE("dataset split and determinism") {
    Dataset a = make_dataset(10, 4, {8, 8, 8}, 31);
    CHECK(a.train.size() == 8);
    CHECK(a.test.size() == 2);
    Dataset b = make_dataset(10, 4, {8, 8, 8}, 31);
    for (std::size_t i = 0; i < a.train.size(); ++i)
        for (std::size_t k = 0; k < a.train[i].frames.size(); ++k)
            CHECK(a.train[i].frames[k].data == b.train[i].frames[k].data);
    Dataset c = make_dataset(10, 4, {8, 8, 8}, 32);
    CHECK(a.train[0].frames[0].data != c.train[0].frames[0].data);
}

TEST_CASE("ambiguous pair shares frame 1 and diverges by frame 3") {
    auto [a, b] = make_ambiguous_pair(6, {16, 16, 8}, 0.03, 0.11, 5);
    CHECK(a.frames[0].data == b.frames[0].data);
    double d3 = 0;
    for (std::int64_t i = 0; i < a.frames[2].size(); ++i)
        d3 += std::abs(a.frames[2][i] - b.frames[2][i]);
    CHECK(d3 > 0.0);
}

TEST_CASE("lvs round trip is byte-identical") {
    LongitudinalVolume v = small_subject();
    const std::string p1 = tmp_path("seq_rt1.lvs"), p2 = tmp_path("seq_rt2.lvs");
    write_lvs(v, p1);
    LongitudinalVolume back = read_lvs(p1);
    write_lvs(back, p2);
    CHECK(slurp(p1) == slurp(p2));
    REQUIRE(back.length() == 3);
    CHECK(back.present == std::vector<bool>{true, true, true});
    // float32 payload: values survive to single precision
    for (std::int64_t i = 0; i < v.frames[0].size(); ++i)
        CHECK(back.frames[0][i] ==
              doctest::Approx(v.frames[0][i]).epsilon(1e-6));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("lvs corruption and partial-presence handling") {
    LongitudinalVolume v = small_subject();
    const std::string p = tmp_path("seq_corrupt.lvs");

    SUBCASE("payload byte flip -> CRC error") {
        write_lvs(v, p);
        std::string bytes = slurp(p);
        bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x7f);
        std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            read_lvs(p);
            FAIL("expected LvsError");
        } catch (const LvsError& e) {
            CHECK(e.kind == LvsError::Kind::bad_crc);
        }
    }
    SUBCASE("bad magic") {
        write_lvs(v, p);
        std::string bytes = slurp(p);
        bytes[0] = 'Q';
        std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            read_lvs(p);
            FAIL("expected LvsError");
        } catch (const LvsError& e) {
            CHECK(e.kind == LvsError::Kind::bad_magic);
        }
    }
    SUBCASE("truncated file") {
        write_lvs(v, p);
        std::string bytes = slurp(p);
        bytes.resize(bytes.size() / 3);
        std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            read_lvs(p);
            FAIL("expected LvsError");
        } catch (const LvsError& e) {
            CHECK((e.kind == LvsError::Kind::truncated || e.kind == LvsError::Kind::bad_crc));
        }
    }
    SUBCASE("only the first frame present") {
        LongitudinalVolume sparse = v;
        for (std::size_t i = 1; i < sparse.frames.size(); ++i) {
            sparse.present[i] = false;
            sparse.frames[i] = Tensor::zeros({8, 8, 4});
        }
        write_lvs(sparse, p);
        LongitudinalVolume back = read_lvs(p);
        CHECK(back.present == std::vector<bool>{true, false, false});
        CHECK(back.frames[0].data == back.frames[0].data);
        for (double x : back.frames[1].data) CHECK(x == 0.0);
    }
    SUBCASE("missing file") {
        try {
            read_lvs(tmp_path("no_such.lvs"));
            FAIL("expected LvsError");
        } catch (const LvsError& e) {
            CHECK(e.kind == LvsError::Kind::io);
        }
    }
    fs::remove(p);
}
