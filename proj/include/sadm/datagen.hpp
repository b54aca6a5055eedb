#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "sadm/rng.hpp"
#include "sadm/sequence.hpp"

namespace sadm {

// Pulsating-ellipsoid subject: a smooth-edged ellipsoid whose radii shrink
// by a fixed per-frame rate. The rate is not recoverable from a single
// frame (base radii vary across subjects), so later frames are ambiguous
// given one image but determined given two or more.
struct EllipsoidSubject {
    std::array<double, 3> center;      // voxel units
    std::array<double, 3> base_radii;  // voxel units
    double contraction = 0.06;         // rho, per-frame radius shrink in [0.02, 0.12]
    double intensity = 1.0;            // peak interior intensity before normalization
    double core_dimming = 0.3;         // radial brightness falloff toward the center

    void validate(int frames, const Shape& extents) const;
};

LongitudinalVolume generate_subject(const EllipsoidSubject& s, int frames, const Shape& extents);

struct Dataset {
    std::vector<LongitudinalVolume> train;
    std::vector<LongitudinalVolume> test;
};

// n random subjects, deterministic by seed, split 80/20, each frame
// Min-Max normalized subject-wise.
Dataset make_dataset(int n_subjects, int frames, const Shape& extents, std::uint64_t seed);

// Two subjects with identical first frames but different contraction rates;
// used to probe sequence-awareness.
std::pair<LongitudinalVolume, LongitudinalVolume> make_ambiguous_pair(int frames, const Shape& extents,
                                                                      double rho_a, double rho_b,
                                                                      std::uint64_t seed);

void min_max_normalize(LongitudinalVolume& v);

struct LvsError : std::runtime_error {
    enum class Kind { io, bad_magic, bad_version, truncated, bad_crc, bad_header };
    Kind kind;
    LvsError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// LVS container: "LVS1" magic, u32 version, u32 L/W/H/D, u32 flags, L-byte
// presence mask, float32 little-endian payload for present frames in index
// order, trailing CRC32 of everything after the magic.
void write_lvs(const LongitudinalVolume& v, const std::string& path);
LongitudinalVolume read_lvs(const std::string& path);

}  // namespace sadm
