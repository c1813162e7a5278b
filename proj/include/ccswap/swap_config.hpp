#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccswap/bbox.hpp"

namespace ccswap {

class DenoiserBackend;

enum class RefineMode { MatrixProduct, Elementwise };

// Parameters of one swap run. Defaults are the published settings.
struct SwapConfig {
    std::string source_prompt;
    std::string target_prompt;
    std::string source_concept;
    std::string target_concept;

    double eta       = 0.1;
    int total_steps  = 550;
    int lambda       = 5;
    double alpha     = 2.0;
    double beta      = 0.5;
    double guidance  = 7.5;
    int t_min        = 50;   // per-iteration timesteps are drawn from [t_min, t_max)
    int t_max        = 950;
    std::uint64_t seed = 0;

    std::optional<BBox> bbox_override;

    // bbox stage: one capture pass per timestep
    std::vector<int> bbox_timesteps{541, 521, 501};
    std::vector<std::string> capture_layers;  // empty: two coarsest resolutions
    RefineMode refine_mode = RefineMode::MatrixProduct;

    // component switches, all on for the full method
    bool bgm         = true;
    bool secr_source = true;
    bool secr_target = true;
    std::vector<std::string> secr_layers;  // empty: every cross-attention layer

    bool trace = false;

    // Throws ParamError on out-of-range values; t_max is checked against the backend schedule.
    void validate(const DenoiserBackend& backend) const;
};

// A customized concept bound to a rare token by external fine-tuning.
struct ConceptSpec {
    std::string token;           // e.g. "sks"
    std::string checkpoint_ref;  // opaque to the pipeline
};

}  // namespace ccswap
