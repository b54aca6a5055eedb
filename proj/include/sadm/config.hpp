#pragma once

#include <string>

#include "sadm/model.hpp"
#include "sadm/sampling.hpp"
#include "sadm/training.hpp"

namespace sadm {

// Everything a run needs, parsed from a line-based `key = value` file with
// dotted section prefixes (e.g. `sample.T = 50`). Unknown keys are
// rejected; every field has a default; the resolved config can be echoed
// back out and re-parsed to reproduce the run.
struct RunConfig {
    std::uint64_t seed = 42;

    int data_subjects = 8;
    int data_frames = 6;
    Shape extents = {16, 16, 8};

    NoiseSchedule schedule;  // lambda_min, lambda_max, T
    AttnConfig attn;
    DenoiserConfig denoiser;
    TrainConfig train;
    SampleConfig sample{50, 0.1, 0.3, 42, false, true};

    ModelConfig model_config() const;

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);
    std::string echo() const;
};

}  // namespace sadm
