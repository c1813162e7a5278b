#include "ccswap/toy_backend.hpp"

#include <cmath>
#include <random>
#include <thread>

#include "ccswap/error.hpp"

namespace ccswap {
namespace {

constexpr const char* kBos = "<bos>";
constexpr const char* kEos = "<eos>";
constexpr const char* kPad = "<pad>";

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    z               = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z               = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Matrix seeded_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng) * scale;
    return m;
}

}  // namespace

ToyBackend::ToyBackend(ToyConfig config) : config_(std::move(config)) {
    if (config_.image_channels <= 0 || config_.downsample <= 0 || config_.height <= 0 || config_.width <= 0) {
        throw ParamError("toy backend dimensions must be positive");
    }
    if (config_.token_limit < 2 || config_.embed_dim <= 0 || config_.d_prime <= 0) {
        throw ParamError("toy backend needs token_limit >= 2 and positive embed_dim/d_prime");
    }

    info_.kind           = "toy";
    info_.latent         = config_.latent_shape();
    info_.downsample     = config_.downsample;
    info_.image_channels = config_.image_channels;
    info_.token_limit    = config_.token_limit;
    info_.embed_dim      = config_.embed_dim;
    schedule_            = NoiseSchedule::scaled_linear(config_.convention);

    layers_ = config_.layers;
    if (layers_.empty()) {
        const GridSize fine{config_.height, config_.width};
        layers_.push_back({"down.0.attn2", fine, 8});
        if (config_.height % 2 == 0 && config_.width % 2 == 0) {
            layers_.push_back({"mid.attn2", {config_.height / 2, config_.width / 2}, 16});
        }
        layers_.push_back({"up.0.attn2", fine, 8});
    }

    const int latent_channels = info_.latent.channels;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerInfo& l = layers_[i];
        if (l.grid.height <= 0 || l.grid.width <= 0 || l.channels <= 0) throw ParamError("bad toy layer " + l.id);
        if (config_.height % l.grid.height != 0 || config_.width % l.grid.width != 0) {
            throw ParamError("toy layer " + l.id + " grid must divide the latent grid");
        }
        const std::uint64_t base = mix(config_.seed, fnv1a(l.id));
        const Eigen::Index n     = static_cast<Eigen::Index>(l.grid.height) * l.grid.width;
        LayerState st;
        st.info                = l;
        st.features.values     = seeded_matrix(n, l.channels, mix(base, 1), 1.0);
        st.features.grid       = l.grid;
        st.features.layer_id   = l.id;
        st.proj.wq             = seeded_matrix(l.channels, config_.d_prime, mix(base, 2), 1.0 / std::sqrt(l.channels));
        st.proj.wk             = seeded_matrix(config_.embed_dim, config_.d_prime, mix(base, 3),
                                               1.0 / std::sqrt(config_.embed_dim));
        st.proj.wv             = seeded_matrix(config_.embed_dim, l.channels, mix(base, 4),
                                               1.0 / std::sqrt(config_.embed_dim));
        st.readout = seeded_matrix(l.channels, latent_channels, mix(base, 5), 1.0 / std::sqrt(l.channels));
        states_.push_back(std::move(st));
    }

    for (const auto& [word, rects] : config_.planted) {
        for (const auto& r : rects) {
            if (r.grid != GridSize{config_.height, config_.width}) {
                throw ParamError("planted rectangle for '" + word + "' must be on the latent grid");
            }
            r.validate();
        }
    }
}

Vector ToyBackend::token_vector(const std::string& token) const {
    const Matrix m = seeded_matrix(1, config_.embed_dim, mix(config_.seed, fnv1a(token)), 1.0);
    return m.row(0).transpose();
}

TextEmbedding ToyBackend::embed_prompt(std::string_view prompt) const {
    const auto words = split_words(prompt);
    if (static_cast<int>(words.size()) + 2 > config_.token_limit) {
        throw TokenLimitExceeded("prompt has " + std::to_string(words.size()) + " words; toy token limit is " +
                                 std::to_string(config_.token_limit) + " including BOS/EOS");
    }
    TextEmbedding e;
    e.tokens.push_back(kBos);
    for (std::size_t i = 0; i < words.size(); ++i) {
        e.tokens.push_back(words[i]);
        e.token_spans[words[i]].push_back(static_cast<int>(i) + 1);
    }
    e.tokens.push_back(kEos);
    while (static_cast<int>(e.tokens.size()) < config_.token_limit) e.tokens.push_back(kPad);

    e.values.resize(config_.token_limit, config_.embed_dim);
    for (int r = 0; r < config_.token_limit; ++r) {
        e.values.row(r) = token_vector(e.tokens[static_cast<std::size_t>(r)]).transpose();
    }
    return e;
}

Latent ToyBackend::pattern(const TextEmbedding& cond) const {
    const std::uint64_t key = cond.key();
    if (auto it = pattern_overrides_.find(key); it != pattern_overrides_.end()) return it->second;
    std::mt19937_64 rng(mix(config_.seed, key));
    std::normal_distribution<double> normal(0.0, 1.0);
    Latent p(info_.latent);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = normal(rng);
    return p;
}

void ToyBackend::set_pattern(std::string_view prompt, Latent pattern) {
    check_latent(pattern);
    pattern_overrides_[embed_prompt(prompt).key()] = std::move(pattern);
}

void ToyBackend::plant(const std::string& word, const BBox& rect) {
    if (rect.grid != GridSize{config_.height, config_.width}) {
        throw ParamError("planted rectangle must be on the latent grid");
    }
    rect.validate();
    config_.planted[word].push_back(rect);
}

const ToyBackend::LayerState& ToyBackend::layer(const std::string& id) const {
    for (const auto& st : states_) {
        if (st.info.id == id) return st;
    }
    throw ParamError("unknown toy layer '" + id + "'");
}

const FeatureMap& ToyBackend::features(const std::string& layer_id) const { return layer(layer_id).features; }
const ProjectionSet& ToyBackend::projections(const std::string& layer_id) const { return layer(layer_id).proj; }

Matrix ToyBackend::self_map(GridSize grid) const {
    const Eigen::Index n = static_cast<Eigen::Index>(grid.height) * grid.width;
    if (config_.self_attention == ToyConfig::SelfAttention::Identity) return Matrix::Identity(n, n);
    Matrix m = Matrix::Zero(n, n);
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            const Eigen::Index row = static_cast<Eigen::Index>(y) * grid.width + x;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy;
                    const int xx = x + dx;
                    if (yy < 0 || yy >= grid.height || xx < 0 || xx >= grid.width) continue;
                    m(row, static_cast<Eigen::Index>(yy) * grid.width + xx) =
                        (dy == 0 && dx == 0) ? config_.self_center_weight : 1.0;
                }
            }
            m.row(row) /= m.row(row).sum();
        }
    }
    return m;
}

Matrix ToyBackend::fine_cross_map(const TextEmbedding& cond) const {
    const int h = config_.height;
    const int w = config_.width;
    const int k = cond.length();
    Matrix logits(static_cast<Eigen::Index>(h) * w, k);
    for (int tok = 0; tok < k; ++tok) {
        const std::string& name = cond.tokens.at(static_cast<std::size_t>(tok));
        const double base       = name == kBos ? config_.bos_logit : 0.0;
        const auto planted      = config_.planted.find(name);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double v = base;
                if (planted != config_.planted.end()) {
                    for (const auto& r : planted->second) {
                        if (r.contains(y, x)) {
                            v = config_.hot_logit;
                            break;
                        }
                    }
                }
                logits(static_cast<Eigen::Index>(y) * w + x, tok) = v;
            }
        }
    }
    softmax_rows(logits);
    return logits;
}

AttentionRecord ToyBackend::synthesize_attention(const TextEmbedding& cond) const {
    const Matrix fine = fine_cross_map(cond);
    AttentionRecord rec;
    for (const auto& l : layers_) {
        const int fy = config_.height / l.grid.height;
        const int fx = config_.width / l.grid.width;
        Matrix cross = Matrix::Zero(static_cast<Eigen::Index>(l.grid.height) * l.grid.width, fine.cols());
        // area-average fine rows into each coarse cell; rows stay stochastic
        for (int y = 0; y < config_.height; ++y) {
            for (int x = 0; x < config_.width; ++x) {
                const Eigen::Index cell = static_cast<Eigen::Index>(y / fy) * l.grid.width + x / fx;
                cross.row(cell) += fine.row(static_cast<Eigen::Index>(y) * config_.width + x);
            }
        }
        cross /= static_cast<double>(fy * fx);
        rec.layer_ids.push_back(l.id);
        rec.layer_dims.push_back(l.grid);
        rec.cross.push_back(std::move(cross));
        rec.self.push_back(self_map(l.grid));
    }
    return rec;
}

NoisePrediction ToyBackend::predict_noise(const Latent& z_t, Timestep t, const TextEmbedding& cond, bool capture,
                                          Branch branch) {
    check_latent(z_t);
    schedule_.check(t);
    if (cond.dim() != config_.embed_dim || cond.length() == 0) {
        throw ShapeError("conditioning embedding does not match the toy embedding width");
    }
    count_forward();
    if (config_.forward_delay.count() > 0) std::this_thread::sleep_for(config_.forward_delay);

    const Latent p = pattern(cond);
    NoisePrediction out{Latent(z_t.shape()), std::nullopt};
    for (std::size_t i = 0; i < z_t.size(); ++i) out.noise[i] = z_t[i] - p[i];

    if (branch != Branch::None && hooks_.any(branch)) {
        const int channels = info_.latent.channels;
        for (const auto& st : states_) {
            const CrossAttentionHook* hook = hooks_.find(branch, st.info.id);
            if (hook == nullptr) continue;
            const Matrix dense  = cross_attention(st.features.values, cond.values, st.proj);
            const Matrix hooked = (*hook)(CrossAttentionCall{st.features, st.proj, cond, dense});
            if (hooked.rows() != dense.rows() || hooked.cols() != dense.cols()) {
                throw ShapeError("hook on layer " + st.info.id + " changed the attention output shape");
            }
            const Matrix residual = (hooked - dense) * st.readout;  // N_l x latent channels
            const int fy          = config_.height / st.info.grid.height;
            const int fx          = config_.width / st.info.grid.width;
            for (int c = 0; c < channels; ++c) {
                for (int y = 0; y < config_.height; ++y) {
                    for (int x = 0; x < config_.width; ++x) {
                        const double r =
                            residual(static_cast<Eigen::Index>(y / fy) * st.info.grid.width + x / fx, c);
                        if (r != 0.0) out.noise.at(c, y, x) -= config_.hook_gain * r;
                    }
                }
            }
        }
    }

    if (capture) out.attention = synthesize_attention(cond);
    return out;
}

Latent ToyBackend::encode_image(const Image& image) const {
    const int f = config_.downsample;
    if (image.height() % f != 0 || image.width() % f != 0) {
        throw ShapeError("image " + image.shape().str() + " is not divisible by the downsampling factor " +
                         std::to_string(f));
    }
    if (image.shape() != info_.image_shape()) {
        throw ShapeError("image " + image.shape().str() + " does not match toy image shape " +
                         info_.image_shape().str());
    }
    // pixel-unshuffle: an exact permutation of the pixel values
    Latent z(info_.latent);
    for (int c = 0; c < config_.image_channels; ++c) {
        for (int dy = 0; dy < f; ++dy) {
            for (int dx = 0; dx < f; ++dx) {
                const int lc = (c * f + dy) * f + dx;
                for (int y = 0; y < config_.height; ++y) {
                    for (int x = 0; x < config_.width; ++x) z.at(lc, y, x) = image.at(c, y * f + dy, x * f + dx);
                }
            }
        }
    }
    return z;
}

Image ToyBackend::decode_latent(const Latent& z) const {
    check_latent(z);
    const int f = config_.downsample;
    Image img(info_.image_shape());
    for (int c = 0; c < config_.image_channels; ++c) {
        for (int dy = 0; dy < f; ++dy) {
            for (int dx = 0; dx < f; ++dx) {
                const int lc = (c * f + dy) * f + dx;
                for (int y = 0; y < config_.height; ++y) {
                    for (int x = 0; x < config_.width; ++x) img.at(c, y * f + dy, x * f + dx) = z.at(lc, y, x);
                }
            }
        }
    }
    return img;
}

}  // namespace ccswap
