#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sadm/params.hpp"

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

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ParameterStore make_store(std::uint64_t seed = 5) {
    ParameterStore s;
    Rng rng(seed);
    s.create_normal("a", {2, 3}, 1.0, rng);
    s.create_normal("b", {4}, 0.5, rng);
    return s;
}

}  // namespace

TEST_CASE("plain gradient step definition") {
    ParameterStore s;
    s.create("w", {1})[0] = 1.0;
    s.entry("w").grad[0] = 1.0;
    s.sgd_step(0.1);
    CHECK(s.entry("w").value[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("zero gradients leave parameters unchanged") {
    ParameterStore s = make_store();
    const auto before_a = s.entry("a").value.data;
    s.zero_grad();
    s.sgd_step(0.1);
    CHECK(s.entry("a").value.data == before_a);
    s.adam_step(0.1);
    CHECK(s.entry("a").value.data == before_a);
}

TEST_CASE("adam matches a hand-rolled reference for three steps") {
    ParameterStore s;
    s.create("w", {1})[0] = 0.5;
    double w = 0.5, m = 0, v = 0;
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int step = 1; step <= 3; ++step) {
        const double g = 0.2 * step;  // arbitrary deterministic gradient
        s.entry("w").grad[0] = g;
        s.adam_step(lr);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, step));
        const double vhat = v / (1 - std::pow(b2, step));
        w -= lr * mhat / (std::sqrt(vhat) + eps);
        CHECK(s.entry("w").value[0] == doctest::Approx(w).epsilon(1e-14));
        s.zero_grad();
    }
}

TEST_CASE("checkpoint round trip is byte-identical") {
    ParameterStore s = make_store();
    s.entry("a").m = Tensor::full({2, 3}, 0.25);  // optimizer state travels too
    s.set_step(17);
    const std::string p1 = tmp_path("ckpt_rt1.bin"), p2 = tmp_path("ckpt_rt2.bin");
    s.save(p1);

    ParameterStore loaded = make_store(99);  // different values, same shapes
    loaded.load(p1);
    CHECK(loaded.step() == 17);
    CHECK(loaded.entry("a").value.data == s.entry("a").value.data);
    loaded.save(p2);
    CHECK(slurp(p1) == slurp(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("corruption and malformed files are detected") {
    ParameterStore s = make_store();
    const std::string p = tmp_path("ckpt_corrupt.bin");
    s.save(p);
    std::string bytes = slurp(p);

    SUBCASE("flipped payload byte -> CRC error") {
        std::string bad = bytes;
        bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x5a);
        spit(p, bad);
        ParameterStore t = make_store();
        try {
            t.load(p);
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::bad_crc);
        }
    }
    SUBCASE("wrong magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        spit(p, bad);
        ParameterStore t = make_store();
        try {
            t.load(p);
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::bad_magic);
        }
    }
    SUBCASE("truncation") {
        spit(p, bytes.substr(0, bytes.size() / 2));
        ParameterStore t = make_store();
        try {
            t.load(p);
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK((e.kind == CheckpointError::Kind::truncated || e.kind == CheckpointError::Kind::bad_crc));
        }
    }
    SUBCASE("shape mismatch names the offending tensor") {
        ParameterStore other;
        Rng rng(1);
        other.create_normal("a", {3, 3}, 1.0, rng);  // wrong shape for "a"
        other.create_normal("b", {4}, 1.0, rng);
        try {
            other.load(p);
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::shape_mismatch);
            CHECK(std::string(e.what()).find("a") != std::string::npos);
        }
    }
    SUBCASE("unknown tensor under strict load") {
        ParameterStore other;
        Rng rng(1);
        other.create_normal("b", {4}, 1.0, rng);  // no "a" slot
        try {
            other.load(p);
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::unknown_tensor);
        }
    }
    SUBCASE("missing file") {
        ParameterStore t = make_store();
        try {
            t.load(tmp_path("no_such_ckpt.bin"));
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::io);
        }
    }
    fs::remove(p);
}

TEST_CASE("identical seeds produce identical stores") {
    ParameterStore a = make_store(123), b = make_store(123);
    CHECK(a.entry("a").value.data == b.entry("a").value.data);
    CHECK(a.entry("b").value.data == b.entry("b").value.data);
}
