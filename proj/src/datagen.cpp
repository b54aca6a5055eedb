#include "sadm/datagen.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "sadm/crc32.hpp"

namespace sadm {

namespace {

constexpr double kEdgeBandwidth = 1.5;  // voxels

double render_voxel(const EllipsoidSubject& s, const std::array<double, 3>& radii, double x, double y,
                    double z) {
    const double dx = (x - s.center[0]) / radii[0];
    const double dy = (y - s.center[1]) / radii[1];
    const double dz = (z - s.center[2]) / radii[2];
    const double u = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double rmin = std::min(radii[0], std::min(radii[1], radii[2]));
    const double dist = (u - 1.0) * rmin;  // approximate signed distance, voxels
    const double falloff = 1.0 / (1.0 + std::exp(dist / kEdgeBandwidth));
    const double interior = std::max(0.0, 1.0 - u * u);
    return falloff * s.intensity * (1.0 - s.core_dimming * interior);
}

}  // namespace

void EllipsoidSubject::validate(int frames, const Shape& extents) const {
    if (extents.size() != 3) throw std::invalid_argument("generate_subject: extents must be (W,H,D)");
    if (frames < 2) throw std::invalid_argument("generate_subject: need at least 2 frames");
    if (!(contraction >= 0.0 && contraction <= 0.12))
        throw std::invalid_argument("generate_subject: contraction rate " + std::to_string(contraction) +
                                    " outside [0, 0.12]");
    const double last_scale = 1.0 - contraction * (frames - 1);
    for (int i = 0; i < 3; ++i) {
        if (base_radii[static_cast<std::size_t>(i)] * last_scale <= 0.0)
            throw std::invalid_argument("generate_subject: radii collapse before frame " +
                                        std::to_string(frames));
        const double r = base_radii[static_cast<std::size_t>(i)];
        const double c = center[static_cast<std::size_t>(i)];
        if (c - r < 0.0 || c + r > static_cast<double>(extents[static_cast<std::size_t>(i)]))
            throw std::invalid_argument("generate_subject: ellipsoid exits the volume on axis " +
                                        std::to_string(i));
    }
}

LongitudinalVolume generate_subject(const EllipsoidSubject& s, int frames, const Shape& extents) {
    s.validate(frames, extents);
    LongitudinalVolume v;
    const std::int64_t W = extents[0], H = extents[1], D = extents[2];
    for (int f = 0; f < frames; ++f) {
        const double scale = 1.0 - s.contraction * f;
        std::array<double, 3> radii = {s.base_radii[0] * scale, s.base_radii[1] * scale,
                                       s.base_radii[2] * scale};
        Tensor frame = Tensor::zeros({W, H, D});
        std::int64_t idx = 0;
        for (std::int64_t x = 0; x < W; ++x)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t z = 0; z < D; ++z, ++idx)
                    frame[idx] = render_voxel(s, radii, static_cast<double>(x) + 0.5,
                                              static_cast<double>(y) + 0.5, static_cast<double>(z) + 0.5);
        v.frames.push_back(std::move(frame));
        v.present.push_back(true);
    }
    min_max_normalize(v);
    return v;
}

void min_max_normalize(LongitudinalVolume& v) {
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
        if (!v.present[f]) continue;
        auto& t = v.frames[f];
        double lo = t[0], hi = t[0];
        for (double x : t.data) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        if (hi > lo)
            for (auto& x : t.data) x = (x - lo) / (hi - lo);
        else
            for (auto& x : t.data) x = 0.0;
    }
}

namespace {

EllipsoidSubject random_subject(const Shape& extents, Rng& rng) {
    EllipsoidSubject s;
    for (int i = 0; i < 3; ++i) {
        const double e = static_cast<double>(extents[static_cast<std::size_t>(i)]);
        s.base_radii[static_cast<std::size_t>(i)] = rng.uniform(0.22 * e, 0.34 * e);
        const double r = s.base_radii[static_cast<std::size_t>(i)];
        s.center[static_cast<std::size_t>(i)] = rng.uniform(r + 0.5, e - r - 0.5);
    }
    s.contraction = rng.uniform(0.02, 0.12);
    s.intensity = rng.uniform(0.8, 1.0);
    s.core_dimming = rng.uniform(0.2, 0.4);
    return s;
}

}  // namespace

Dataset make_dataset(int n_subjects, int frames, const Shape& extents, std::uint64_t seed) {
    if (n_subjects < 2) throw std::invalid_argument("make_dataset: need at least 2 subjects");
    Rng rng(seed);
    Dataset ds;
    const int n_train = (n_subjects * 4) / 5;
    for (int i = 0; i < n_subjects; ++i) {
        auto subj = generate_subject(random_subject(extents, rng), frames, extents);
        (i < n_train ? ds.train : ds.test).push_back(std::move(subj));
    }
    return ds;
}

std::pair<LongitudinalVolume, LongitudinalVolume> make_ambiguous_pair(int frames, const Shape& extents,
                                                                      double rho_a, double rho_b,
                                                                      std::uint64_t seed) {
    Rng rng(seed);
    EllipsoidSubject a = random_subject(extents, rng);
    EllipsoidSubject b = a;  // identical frame 1 by construction
    a.contraction = rho_a;
    b.contraction = rho_b;
    return {generate_subject(a, frames, extents), generate_subject(b, frames, extents)};
}

namespace {

constexpr char kLvsMagic[4] = {'L', 'V', 'S', '1'};
constexpr std::uint32_t kLvsVersion = 1;

}  // namespace

void write_lvs(const LongitudinalVolume& v, const std::string& path) {
    const auto& fs = v.frame_shape();
    std::string body;
    auto put32 = [&body](std::uint32_t x) { body.append(reinterpret_cast<const char*>(&x), 4); };
    put32(kLvsVersion);
    put32(static_cast<std::uint32_t>(v.length()));
    put32(static_cast<std::uint32_t>(fs[0]));
    put32(static_cast<std::uint32_t>(fs[1]));
    put32(static_cast<std::uint32_t>(fs[2]));
    put32(0);  // flags
    for (bool p : v.present) body.push_back(p ? 1 : 0);
    for (std::int64_t f = 0; f < v.length(); ++f) {
        if (!v.present[static_cast<std::size_t>(f)]) continue;
        for (double x : v.frames[static_cast<std::size_t>(f)].data) {
            float g = static_cast<float>(x);
            body.append(reinterpret_cast<const char*>(&g), 4);
        }
    }
    std::uint32_t crc = Crc32::of(body.data(), body.size());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw LvsError(LvsError::Kind::io, "cannot open for write: " + path);
    f.write(kLvsMagic, 4);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    f.write(reinterpret_cast<const char*>(&crc), 4);
    if (!f) throw LvsError(LvsError::Kind::io, "write failed: " + path);
}

LongitudinalVolume read_lvs(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LvsError(LvsError::Kind::io, "cannot open for read: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 4 + 24 + 4) throw LvsError(LvsError::Kind::truncated, "file too short: " + path);
    if (std::memcmp(bytes.data(), kLvsMagic, 4) != 0)
        throw LvsError(LvsError::Kind::bad_magic, "bad magic in " + path);
    std::uint32_t crc_file;
    std::memcpy(&crc_file, bytes.data() + bytes.size() - 4, 4);
    const std::size_t body_len = bytes.size() - 8;
    if (Crc32::of(bytes.data() + 4, body_len) != crc_file)
        throw LvsError(LvsError::Kind::bad_crc, "CRC mismatch in " + path);

    std::size_t pos = 4;
    auto get32 = [&]() {
        std::uint32_t x;
        std::memcpy(&x, bytes.data() + pos, 4);
        pos += 4;
        return x;
    };
    const std::uint32_t version = get32();
    if (version != kLvsVersion)
        throw LvsError(LvsError::Kind::bad_version, "unsupported LVS version " + std::to_string(version));
    const std::uint32_t L = get32(), W = get32(), H = get32(), D = get32();
    get32();  // flags
    if (L < 1 || W < 1 || H < 1 || D < 1)
        throw LvsError(LvsError::Kind::bad_header, "degenerate extents in " + path);
    if (pos + L > bytes.size() - 4) throw LvsError(LvsError::Kind::truncated, "mask truncated in " + path);
    LongitudinalVolume v;
    std::size_t n_present = 0;
    for (std::uint32_t i = 0; i < L; ++i) {
        const bool p = bytes[pos++] != 0;
        v.present.push_back(p);
        n_present += p ? 1 : 0;
    }
    const std::size_t voxels = static_cast<std::size_t>(W) * H * D;
    if (pos + n_present * voxels * 4 != bytes.size() - 4)
        throw LvsError(LvsError::Kind::truncated, "payload length mismatch in " + path);
    for (std::uint32_t i = 0; i < L; ++i) {
        Tensor frame = Tensor::zeros({static_cast<std::int64_t>(W), static_cast<std::int64_t>(H),
                                      static_cast<std::int64_t>(D)});
        if (v.present[i]) {
            for (std::size_t j = 0; j < voxels; ++j) {
                float g;
                std::memcpy(&g, bytes.data() + pos, 4);
                pos += 4;
                frame[static_cast<std::int64_t>(j)] = static_cast<double>(g);
            }
        }
        v.frames.push_back(std::move(frame));
    }
    return v;
}

}  // namespace sadm
