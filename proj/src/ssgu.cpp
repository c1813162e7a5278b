#include "ccswap/ssgu.hpp"

#include "ccswap/error.hpp"

namespace ccswap::ssgu {

Schedule::Schedule(int total_steps, int period) : total_steps_(total_steps), period_(period) {
    if (total_steps < 0) throw ParamError("total_steps must be >= 0");
    if (period < 1) throw ParamError("SSGU period must be >= 1");
}

std::vector<int> Schedule::anchors() const {
    std::vector<int> out;
    for (int i = 0; i < total_steps_; i += period_) out.push_back(i);
    return out;
}

Schedule plan(int total_steps, int period) {
    if (total_steps < 1) throw ParamError("T must be >= 1");
    if (period < 1) throw ParamError("lambda must be >= 1");
    return Schedule(total_steps, period);
}

StepGradient gradient_for_step(int step, const Schedule& schedule, GradientCache& cache, const GradientThunk& compute) {
    if (step < 0 || step >= schedule.total_steps()) {
        throw ParamError("step " + std::to_string(step) + " outside [0, " + std::to_string(schedule.total_steps()) + ")");
    }
    if (schedule.is_anchor(step)) {
        GradientField g        = compute();
        cache.last_anchor_step = step;
        cache.last_gradient    = g;
        return StepGradient{std::move(g), true};
    }
    if (!cache.last_gradient || !cache.last_anchor_step || *cache.last_anchor_step > step) {
        throw ContractError("non-anchor step " + std::to_string(step) + " has no cached anchor gradient");
    }
    return StepGradient{*cache.last_gradient, false};
}

Latent apply_update(const Latent& latent, const GradientField& grad, double eta) {
    require_same_shape(latent, grad.values, "apply_update");
    Latent out(latent.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = latent[i] - eta * grad.values[i];
    return out;
}

}  // namespace ccswap::ssgu
