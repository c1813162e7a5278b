#pragma once

#include <string>

#include "ccswap/backbone.hpp"

namespace ccswap {

struct AdapterConfig {
    std::string checkpoint;
    int image_size      = 512;
    int latent_channels = 4;
    int downsample      = 8;
    int token_limit     = 77;
    int embed_dim       = 1024;
};

// Metadata-only stand-in for a latent diffusion checkpoint (SD 2.x layout).
// It declares dims, schedule and attention layers; every compute entry point throws
// UnsupportedBackend until an inference runtime is linked behind it.
class DiffusionAdapter final : public DenoiserBackend {
public:
    explicit DiffusionAdapter(AdapterConfig config);

    const BackendInfo& info() const override { return info_; }
    const NoiseSchedule& schedule() const override { return schedule_; }
    const std::vector<LayerInfo>& layers() const override { return layers_; }

    TextEmbedding embed_prompt(std::string_view prompt) const override;
    NoisePrediction predict_noise(const Latent& z_t, Timestep t, const TextEmbedding& cond, bool capture,
                                  Branch branch = Branch::None) override;
    Latent encode_image(const Image& image) const override;
    Image decode_latent(const Latent& z) const override;

private:
    [[noreturn]] void unavailable(const char* op) const;

    AdapterConfig config_;
    BackendInfo info_;
    NoiseSchedule schedule_;
    std::vector<LayerInfo> layers_;
};

}  // namespace ccswap
