#include "ccswap/swap_config.hpp"

#include <cmath>

#include "ccswap/backbone.hpp"
#include "ccswap/error.hpp"

namespace ccswap {

void SwapConfig::validate(const DenoiserBackend& backend) const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ParamError("eta must be finite and >= 0");
    if (total_steps < 0) throw ParamError("total_steps must be >= 0");
    if (lambda < 1) throw ParamError("lambda must be >= 1");
    if (!(alpha >= 1.0)) throw ParamError("alpha must be >= 1");
    if (!(beta > 0.0 && beta < 1.0)) throw ParamError("beta must lie in (0, 1)");
    if (!(guidance >= 0.0)) throw ParamError("guidance must be >= 0");
    const int limit = backend.schedule().t_max();
    if (!(0 < t_min && t_min < t_max && t_max <= limit)) {
        throw ParamError("need 0 < t_min < t_max <= " + std::to_string(limit) + ", got (" + std::to_string(t_min) +
                         ", " + std::to_string(t_max) + ")");
    }
    for (int t : bbox_timesteps) backend.schedule().check(t);
    if (bbox_timesteps.empty()) throw ParamError("bbox stage needs at least one timestep");
    if (bbox_override) {
        bbox_override->validate();
        const auto& lat = backend.info().latent;
        if (bbox_override->grid != GridSize{lat.height, lat.width}) {
            throw ParamError("bbox override must be on the latent grid " + std::to_string(lat.height) + "x" +
                             std::to_string(lat.width));
        }
    }
}

}  // namespace ccswap
