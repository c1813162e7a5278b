#include "ccswap/distill.hpp"

#include "ccswap/error.hpp"

namespace ccswap {

Latent cfg_combine(const Latent& eps_uncond, const Latent& eps_cond, double scale) {
    require_same_shape(eps_uncond, eps_cond, "cfg_combine");
    if (scale == 1.0) return eps_cond;
    if (scale == 0.0) return eps_uncond;
    Latent out(eps_cond.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = eps_uncond[i] + scale * (eps_cond[i] - eps_uncond[i]);
    return out;
}

double gradient_weight(const NoiseSchedule& schedule, Timestep t) {
    schedule.check(t);
    return 1.0;
}

Latent guided_prediction(DenoiserBackend& backend, const Latent& z_t, Timestep t, const BranchInput& branch) {
    if (!(branch.guidance >= 0.0)) throw ParamError("guidance must be >= 0");
    Latent cond = backend.predict_noise(z_t, t, branch.embedding, false, branch.branch).noise;
    if (branch.guidance == 1.0) return cond;
    const Latent uncond = backend.predict_noise(z_t, t, branch.uncond_embedding, false, branch.branch).noise;
    return cfg_combine(uncond, cond, branch.guidance);
}

NoisedBranch noise_branch(const DenoiserBackend& backend, const BranchInput& input, Timestep t, const Latent& eps) {
    return NoisedBranch{&input, backend.add_noise(input.latent, t, eps), t, eps};
}

GradientField sds_gradient(const BranchInput& branch, Timestep t, const Latent& eps, DenoiserBackend& backend) {
    const double w    = gradient_weight(backend.schedule(), t);
    const Latent z_t  = backend.add_noise(branch.latent, t, eps);
    const Latent pred = guided_prediction(backend, z_t, t, branch);
    GradientField g{Latent(pred.shape()), t, w};
    for (std::size_t i = 0; i < pred.size(); ++i) g.values[i] = w * (pred[i] - eps[i]);
    return g;
}

GradientField dds_gradient(const NoisedBranch& target, const NoisedBranch& source, DenoiserBackend& backend) {
    if (target.input == nullptr || source.input == nullptr) throw ContractError("noised branch without its input");
    if (target.t != source.t) {
        throw ContractError("branches noised at different timesteps (" + std::to_string(target.t) + " vs " +
                            std::to_string(source.t) + ")");
    }
    if (!(target.eps == source.eps)) throw ContractError("branches noised with different noise draws");

    const double w          = gradient_weight(backend.schedule(), target.t);
    const Latent pred_tgt   = guided_prediction(backend, target.z_t, target.t, *target.input);
    const Latent pred_src   = guided_prediction(backend, source.z_t, source.t, *source.input);
    GradientField g{Latent(pred_tgt.shape()), target.t, w};
    for (std::size_t i = 0; i < pred_tgt.size(); ++i) g.values[i] = w * (pred_tgt[i] - pred_src[i]);
    return g;
}

GradientField dds_gradient(const BranchInput& target, const BranchInput& source, Timestep t, const Latent& eps,
                           DenoiserBackend& backend) {
    require_same_shape(target.latent, source.latent, "dds_gradient");
    return dds_gradient(noise_branch(backend, target, t, eps), noise_branch(backend, source, t, eps), backend);
}

GradientField bgm_apply(GradientField grad, const BBox& bbox) {
    bbox.validate();
    Latent& v = grad.values;
    if (bbox.grid != GridSize{v.height(), v.width()}) {
        throw ShapeError("bbox grid " + std::to_string(bbox.grid.height) + "x" + std::to_string(bbox.grid.width) +
                         " does not match gradient grid " + v.shape().str());
    }
    for (int c = 0; c < v.channels(); ++c) {
        for (int y = 0; y < v.height(); ++y) {
            for (int x = 0; x < v.width(); ++x) {
                if (!bbox.contains(y, x)) v.at(c, y, x) = 0.0;
            }
        }
    }
    return grad;
}

}  // namespace ccswap
