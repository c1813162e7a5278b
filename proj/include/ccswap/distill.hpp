#pragma once

#include "ccswap/backbone.hpp"
#include "ccswap/bbox.hpp"
#include "ccswap/tensor.hpp"

namespace ccswap {

struct GradientField {
    Latent values;
    Timestep t = 0;
    double weight = 1.0;

    bool all_finite() const { return values.all_finite(); }
};

// One prompt branch of a distillation step.
struct BranchInput {
    Latent latent;
    TextEmbedding embedding;
    TextEmbedding uncond_embedding;
    double guidance = 1.0;
    Branch branch   = Branch::None;  // selects the hooks applied during its forward passes
};

// A branch after noising; carries the draw so the two DDS branches can be checked for agreement.
struct NoisedBranch {
    const BranchInput* input = nullptr;
    Latent z_t;
    Timestep t = 0;
    Latent eps;
};

// eps_uncond + scale * (eps_cond - eps_uncond); scale 0 and 1 return the inputs exactly.
Latent cfg_combine(const Latent& eps_uncond, const Latent& eps_cond, double scale);

// w(t). Constant 1: the step size is controlled by the learning rate alone.
double gradient_weight(const NoiseSchedule& schedule, Timestep t);

// Guided noise prediction of one branch at an already-noised latent. The unconditional
// pass is skipped when guidance == 1.
Latent guided_prediction(DenoiserBackend& backend, const Latent& z_t, Timestep t, const BranchInput& branch);

// Forward passes one guided prediction costs.
inline int passes_per_prediction(double guidance) { return guidance == 1.0 ? 1 : 2; }

NoisedBranch noise_branch(const DenoiserBackend& backend, const BranchInput& input, Timestep t, const Latent& eps);

// w(t) * (guided prediction at alpha_t z + sigma_t eps  -  eps)
GradientField sds_gradient(const BranchInput& branch, Timestep t, const Latent& eps, DenoiserBackend& backend);

// w(t) * (target prediction - source prediction), both branches noised with the same t and eps.
GradientField dds_gradient(const BranchInput& target, const BranchInput& source, Timestep t, const Latent& eps,
                           DenoiserBackend& backend);
// Throws ContractError when the branches were noised with different t or eps.
GradientField dds_gradient(const NoisedBranch& target, const NoisedBranch& source, DenoiserBackend& backend);

// Zeroes every channel at spatial positions outside `bbox` (on the gradient's grid).
GradientField bgm_apply(GradientField grad, const BBox& bbox);

}  // namespace ccswap
