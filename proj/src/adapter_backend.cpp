#include "ccswap/adapter_backend.hpp"

#include "ccswap/error.hpp"

namespace ccswap {

DiffusionAdapter::DiffusionAdapter(AdapterConfig config) : config_(std::move(config)) {
    if (config_.image_size <= 0 || config_.downsample <= 0 || config_.image_size % config_.downsample != 0) {
        throw ParamError("adapter image_size must be a positive multiple of the downsampling factor");
    }
    const int side       = config_.image_size / config_.downsample;
    info_.kind           = "diffusion-adapter";
    info_.checkpoint     = config_.checkpoint;
    info_.latent         = Shape3{config_.latent_channels, side, side};
    info_.downsample     = config_.downsample;
    info_.image_channels = 3;
    info_.token_limit    = config_.token_limit;
    info_.embed_dim      = config_.embed_dim;
    schedule_            = NoiseSchedule::scaled_linear(NoiseSchedule::Convention::VariancePreserving);

    // U-Net cross-attention layers: two per down block, one in the middle, three per up block.
    const int widths[3] = {320, 640, 1280};
    for (int b = 0; b < 3; ++b) {
        const int s = side >> b;
        for (int i = 0; i < 2; ++i) {
            layers_.push_back({"down." + std::to_string(b) + ".attn" + std::to_string(i), {s, s}, widths[b]});
        }
    }
    layers_.push_back({"mid.attn0", {side >> 3, side >> 3}, 1280});
    for (int b = 1; b < 4; ++b) {
        const int s = side >> (3 - b);
        for (int i = 0; i < 3; ++i) {
            layers_.push_back({"up." + std::to_string(b) + ".attn" + std::to_string(i), {s, s}, widths[3 - b]});
        }
    }
}

void DiffusionAdapter::unavailable(const char* op) const {
    throw UnsupportedBackend(std::string(op) + ": no inference runtime is linked for checkpoint '" +
                             config_.checkpoint + "'");
}

TextEmbedding DiffusionAdapter::embed_prompt(std::string_view) const { unavailable("embed_prompt"); }

NoisePrediction DiffusionAdapter::predict_noise(const Latent& z_t, Timestep t, const TextEmbedding&, bool, Branch) {
    check_latent(z_t);
    schedule_.check(t);
    unavailable("predict_noise");
}

Latent DiffusionAdapter::encode_image(const Image& image) const {
    if (image.height() % config_.downsample != 0 || image.width() % config_.downsample != 0) {
        throw ShapeError("image " + image.shape().str() + " is not divisible by " + std::to_string(config_.downsample));
    }
    unavailable("encode_image");
}

Image DiffusionAdapter::decode_latent(const Latent& z) const {
    check_latent(z);
    unavailable("decode_latent");
}

}  // namespace ccswap
