#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ccswap/distill.hpp"

namespace ccswap::ssgu {

// Anchor iterations {i : i mod period == 0, 0 <= i < total_steps}. Indices count
// optimization iterations, not diffusion timesteps.
class Schedule {
public:
    Schedule(int total_steps, int period);

    int period() const { return period_; }
    int total_steps() const { return total_steps_; }
    bool is_anchor(int step) const { return step % period_ == 0; }
    // ceil(total_steps / period)
    int forward_pass_count() const { return total_steps_ == 0 ? 0 : (total_steps_ - 1) / period_ + 1; }
    std::vector<int> anchors() const;

private:
    int total_steps_;
    int period_;
};

// Throws ParamError for T < 1 or lambda < 1.
Schedule plan(int total_steps, int period);

struct GradientCache {
    std::optional<int> last_anchor_step;
    std::optional<GradientField> last_gradient;
};

struct StepGradient {
    GradientField gradient;
    bool computed = false;
};

using GradientThunk = std::function<GradientField()>;

// Anchor step: run `compute` and refresh the cache. Otherwise: the cached gradient, unchanged.
StepGradient gradient_for_step(int step, const Schedule& schedule, GradientCache& cache, const GradientThunk& compute);

// latent - eta * grad
Latent apply_update(const Latent& latent, const GradientField& grad, double eta);

}  // namespace ccswap::ssgu
