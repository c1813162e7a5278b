#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ccswap/backbone.hpp"
#include "ccswap/bbox.hpp"
#include "ccswap/distill.hpp"
#include "ccswap/rng.hpp"
#include "ccswap/ssgu.hpp"
#include "ccswap/swap_config.hpp"

namespace ccswap {

struct StepRecord {
    int step = 0;
    Timestep t = 0;
    bool computed = false;
    double grad_norm = 0.0;
};

struct SwapResult {
    Image image;
    Latent source_latent;
    Latent final_latent;
    BBox bbox_used;
    std::vector<BBox> stage_bboxes;
    std::uint64_t forward_passes = 0;
    int anchor_steps = 0;
    double wall_clock = 0.0;  // seconds
    std::vector<StepRecord> trace;
};

struct NoiseDraw {
    Timestep t = 0;
    Latent eps;
};

// Per-anchor timestep and noise draws, seeded from the run seed.
class StepSampler {
public:
    StepSampler(std::uint64_t seed, int t_min, int t_max);
    NoiseDraw next(const Shape3& shape);

private:
    Rng rng_;
    int t_min_;
    int t_max_;
};

// Gradient for the current latent at an anchor step.
using AnchorGradient = std::function<GradientField(const Latent& current, int step)>;

struct LoopResult {
    Latent latent;
    int computed = 0;
    std::vector<StepRecord> trace;
};

// SGD with step-skipping: gradients are computed at anchor steps and reused in between.
// Throws NumericalError naming the step when a gradient is not finite.
LoopResult optimize_latent(Latent init, const ssgu::Schedule& schedule, double eta, const AnchorGradient& gradient,
                           bool trace = false);

// Concept swap: bbox (generated unless overridden), SECR on both branches, masked DDS with SSGU.
SwapResult swap(const Image& source_image, const SwapConfig& cfg, const ConceptSpec& spec, DenoiserBackend& backend);

// Insertion into cfg.bbox_override; the source branch sees the null concept.
SwapResult insert(const Image& source_image, const SwapConfig& cfg, const ConceptSpec& spec,
                  DenoiserBackend& backend);

// Removal: target prompt and target concept are the null prompt.
SwapResult remove(const Image& source_image, const SwapConfig& cfg, DenoiserBackend& backend);

// Sequential single-concept swaps; each stage starts from the previous output.
SwapResult multi_swap(const Image& source_image, const std::vector<SwapConfig>& cfgs,
                      const std::vector<ConceptSpec>& concepts, DenoiserBackend& backend);

enum class Baseline { Sds, Dds };

// Unmasked, unhooked score distillation over the whole latent, with the same SSGU loop.
SwapResult run_baseline(Baseline method, const Image& source_image, const SwapConfig& cfg, DenoiserBackend& backend);

}  // namespace ccswap
