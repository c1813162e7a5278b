#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccswap/bbox.hpp"
#include "ccswap/tensor.hpp"

namespace ccswap {

using Timestep = int;

// Lowercased words of a prompt; whitespace and basic punctuation separate words.
std::vector<std::string> split_words(std::string_view text);

struct TextEmbedding {
    Matrix values;                                            // tokens x embed_dim
    std::vector<std::string> tokens;                          // includes special tokens
    std::map<std::string, std::vector<int>> token_spans;      // word -> token rows

    int length() const { return static_cast<int>(values.rows()); }
    int dim() const { return static_cast<int>(values.cols()); }

    // Content hash of the embedding values; identical embeddings share a key.
    std::uint64_t key() const;

    // Token rows of every word in `words`, in prompt order. Throws PromptError if any word is absent.
    std::vector<int> indices_of(std::string_view words) const;

    // Rows of the word tokens only (no BOS/EOS/padding).
    std::vector<int> word_rows() const;

    TextEmbedding select_rows(const std::vector<int>& rows) const;
};

class NoiseSchedule {
public:
    // VariancePreserving: z_t = sqrt(abar) z + sqrt(1-abar) eps.
    // VarianceExploding:  z_t = z + sqrt((1-abar)/abar) eps  (alpha fixed at 1, sigma grows with t).
    enum class Convention { VariancePreserving, VarianceExploding };

    static NoiseSchedule scaled_linear(Convention convention, int steps = 1000, double beta_start = 0.00085,
                                       double beta_end = 0.012);
    static NoiseSchedule from_coefficients(std::vector<double> alphas, std::vector<double> sigmas);

    double alpha(Timestep t) const;
    double sigma(Timestep t) const;
    int t_max() const { return static_cast<int>(alphas_.size()); }
    Convention convention() const { return convention_; }
    void check(Timestep t) const;

private:
    std::vector<double> alphas_;
    std::vector<double> sigmas_;
    Convention convention_ = Convention::VariancePreserving;
};

struct LayerInfo {
    std::string id;
    GridSize grid;
    int channels = 0;
};

struct AttentionRecord {
    std::vector<std::string> layer_ids;
    std::vector<GridSize> layer_dims;
    std::vector<Matrix> cross;  // N x K per layer
    std::vector<Matrix> self;   // N x N per layer

    std::size_t size() const { return layer_ids.size(); }
    std::size_t index_of(const std::string& layer_id) const;
};

// Image features of one attention layer. Row y*w + x holds the channel vector at (y, x).
struct FeatureMap {
    Matrix values;  // N x channels
    GridSize grid;
    std::string layer_id;

    void validate() const;
};

// Layer projection weights. Queries are features * wq, keys embedding * wk, values embedding * wv.
struct ProjectionSet {
    Matrix wq;  // channels x d'
    Matrix wk;  // embed_dim x d'
    Matrix wv;  // embed_dim x value width
    int d_prime() const { return static_cast<int>(wq.cols()); }
};

struct CrossAttentionCall {
    const FeatureMap& features;
    const ProjectionSet& projections;
    const TextEmbedding& cond;
    const Matrix& dense_output;  // N x value width
};

using CrossAttentionHook = std::function<Matrix(const CrossAttentionCall&)>;

enum class Branch { None, Source, Target };
const char* branch_name(Branch b);

// Per-branch, per-layer cross-attention interceptors. Mutations must be externally serialized.
class HookRegistry {
public:
    struct Entry {
        Branch branch;
        std::string layer_id;
        std::string label;
    };

    void set(Branch branch, const std::string& layer_id, CrossAttentionHook hook, std::string label);
    void clear(Branch branch, const std::string& layer_id);
    const CrossAttentionHook* find(Branch branch, const std::string& layer_id) const;
    bool any(Branch branch) const;
    bool empty() const { return hooks_.empty(); }
    std::vector<Entry> dump() const;

    // Owner signature per branch, used to make repeated identical installs no-ops.
    const std::string* owner(Branch branch) const;
    void set_owner(Branch branch, std::string signature);
    void clear_owner(Branch branch);

private:
    struct Slot {
        CrossAttentionHook hook;
        std::string label;
    };
    std::map<std::pair<Branch, std::string>, Slot> hooks_;
    std::map<Branch, std::string> owners_;
};

struct NoisePrediction {
    Latent noise;
    std::optional<AttentionRecord> attention;
};

struct BackendInfo {
    std::string kind;
    std::string checkpoint;
    Shape3 latent;
    int downsample = 1;       // image pixels per latent cell along each axis
    int image_channels = 3;
    int token_limit = 0;
    int embed_dim = 0;

    Shape3 image_shape() const { return Shape3{image_channels, latent.height * downsample, latent.width * downsample}; }
};

// Text-conditioned denoiser with attention capture. Instances are single-threaded.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    virtual const BackendInfo& info() const = 0;
    virtual const NoiseSchedule& schedule() const = 0;
    virtual const std::vector<LayerInfo>& layers() const = 0;

    virtual TextEmbedding embed_prompt(std::string_view prompt) const = 0;
    virtual NoisePrediction predict_noise(const Latent& z_t, Timestep t, const TextEmbedding& cond, bool capture,
                                          Branch branch = Branch::None) = 0;
    virtual Latent encode_image(const Image& image) const = 0;
    virtual Image decode_latent(const Latent& z) const = 0;

    // alpha_t * z + sigma_t * eps
    Latent add_noise(const Latent& z, Timestep t, const Latent& eps) const;

    virtual bool supports_hooks() const { return false; }
    // Throws UnsupportedBackend when the backend cannot intercept cross-attention.
    HookRegistry& hooks();
    const HookRegistry& hooks() const { return hooks_; }

    std::uint64_t forward_count() const { return forward_count_; }

protected:
    void count_forward() { ++forward_count_; }
    void check_latent(const Latent& z) const;

    HookRegistry hooks_;

private:
    std::uint64_t forward_count_ = 0;
};

// Layers at the backend's two coarsest resolutions, in declaration order.
std::vector<std::string> default_capture_layers(const std::vector<LayerInfo>& layers);

// Dense cross-attention: softmax(F wq (E wk)^T / sqrt(d')) (E wv). Returns N x value width.
Matrix cross_attention(const Matrix& features, const Matrix& context, const ProjectionSet& proj);
// The row-stochastic weight matrix of the above.
Matrix cross_attention_weights(const Matrix& features, const Matrix& context, const ProjectionSet& proj);

// Numerically stable in-place row softmax.
void softmax_rows(Matrix& m);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);

}  // namespace ccswap
