#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ccswap/backbone.hpp"

namespace ccswap {

// Closed-form CPU backend used by every test and by the CLI when no model is available.
//
//   predict_noise(z_t, t, c) = z_t - pattern(c) - hook_residual
//
// pattern(c) is a seeded normal array keyed by the embedding content (overridable per
// prompt). Captured attention is synthesized: each planted word gets a hot rectangle in
// its cross-attention column, self-attention is a local 3x3 kernel (or identity).
// Each attention layer owns fixed seeded features and projections; a hook installed on a
// layer changes the prediction by readout(hooked - dense), upsampled to the latent grid,
// so unhooked predictions stay exactly on the closed form.
struct ToyConfig {
    enum class SelfAttention { Local, Identity };

    int image_channels = 1;
    int downsample     = 2;  // latent channels = image_channels * downsample^2
    int height         = 16;
    int width          = 16;
    int token_limit    = 16;
    int embed_dim      = 8;
    int d_prime        = 4;
    std::uint64_t seed = 0;

    // Empty: two layers at latent resolution and one at half resolution (when even).
    std::vector<LayerInfo> layers;

    // word -> rectangles on the latent grid where its cross-attention column is hot
    std::map<std::string, std::vector<BBox>> planted;

    SelfAttention self_attention = SelfAttention::Local;
    double self_center_weight    = 20.0;  // neighbours weigh 1
    double hot_logit             = 8.0;
    double bos_logit             = 2.0;
    double hook_gain             = 0.5;

    std::chrono::microseconds forward_delay{0};
    NoiseSchedule::Convention convention = NoiseSchedule::Convention::VarianceExploding;

    Shape3 latent_shape() const { return Shape3{image_channels * downsample * downsample, height, width}; }
};

class ToyBackend final : public DenoiserBackend {
public:
    explicit ToyBackend(ToyConfig config = {});

    const BackendInfo& info() const override { return info_; }
    const NoiseSchedule& schedule() const override { return schedule_; }
    const std::vector<LayerInfo>& layers() const override { return layers_; }

    TextEmbedding embed_prompt(std::string_view prompt) const override;
    NoisePrediction predict_noise(const Latent& z_t, Timestep t, const TextEmbedding& cond, bool capture,
                                  Branch branch = Branch::None) override;
    Latent encode_image(const Image& image) const override;
    Image decode_latent(const Latent& z) const override;

    bool supports_hooks() const override { return true; }

    const ToyConfig& config() const { return config_; }

    // Fixed target array the closed form pulls toward under this conditioning.
    Latent pattern(const TextEmbedding& cond) const;
    void set_pattern(std::string_view prompt, Latent pattern);

    void plant(const std::string& word, const BBox& rect);

    const FeatureMap& features(const std::string& layer_id) const;
    const ProjectionSet& projections(const std::string& layer_id) const;

    // Synthesized attention for `cond` on every declared layer.
    AttentionRecord synthesize_attention(const TextEmbedding& cond) const;

private:
    struct LayerState {
        LayerInfo info;
        FeatureMap features;
        ProjectionSet proj;
        Matrix readout;  // channels x latent channels
    };

    const LayerState& layer(const std::string& id) const;
    Matrix self_map(GridSize grid) const;
    Matrix fine_cross_map(const TextEmbedding& cond) const;
    Vector token_vector(const std::string& token) const;

    ToyConfig config_;
    BackendInfo info_;
    NoiseSchedule schedule_;
    std::vector<LayerInfo> layers_;
    std::vector<LayerState> states_;
    std::map<std::uint64_t, Latent> pattern_overrides_;
};

}  // namespace ccswap
