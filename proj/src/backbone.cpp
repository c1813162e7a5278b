#include "ccswap/backbone.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <set>

#include "ccswap/error.hpp"

namespace ccswap {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) words.push_back(std::move(current));
        current.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || std::strchr(",.;:!?\"()[]", ch) != nullptr) {
            flush();
        } else {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return words;
}

// ---------------------------------------------------------------------------
// TextEmbedding

std::uint64_t TextEmbedding::key() const {
    std::uint64_t h = fnv1a(std::string_view(reinterpret_cast<const char*>(values.data()),
                                             static_cast<std::size_t>(values.size()) * sizeof(double)));
    const std::int64_t dims[2] = {values.rows(), values.cols()};
    return fnv1a(std::string_view(reinterpret_cast<const char*>(dims), sizeof(dims)), h);
}

std::vector<int> TextEmbedding::indices_of(std::string_view words) const {
    const auto ws = split_words(words);
    if (ws.empty()) throw PromptError("empty concept word");
    std::vector<int> out;
    for (const auto& w : ws) {
        auto it = token_spans.find(w);
        if (it == token_spans.end()) throw PromptError("concept word '" + w + "' does not occur in the prompt");
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<int> TextEmbedding::word_rows() const {
    std::set<int> rows;
    for (const auto& [word, idx] : token_spans) rows.insert(idx.begin(), idx.end());
    return {rows.begin(), rows.end()};
}

TextEmbedding TextEmbedding::select_rows(const std::vector<int>& rows) const {
    TextEmbedding out;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= length()) throw ShapeError("token row out of range");
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
        out.tokens.push_back(tokens.at(static_cast<std::size_t>(rows[i])));
    }
    for (const auto& [word, idx] : token_spans) {
        for (int r : idx) {
            auto pos = std::find(rows.begin(), rows.end(), r);
            if (pos != rows.end()) out.token_spans[word].push_back(static_cast<int>(pos - rows.begin()));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// NoiseSchedule

NoiseSchedule NoiseSchedule::scaled_linear(Convention convention, int steps, double beta_start, double beta_end) {
    if (steps < 2) throw ParamError("schedule needs at least 2 steps");
    NoiseSchedule s;
    s.convention_ = convention;
    s.alphas_.resize(static_cast<std::size_t>(steps));
    s.sigmas_.resize(static_cast<std::size_t>(steps));
    const double a = std::sqrt(beta_start);
    const double b = std::sqrt(beta_end);
    double abar = 1.0;
    for (int t = 0; t < steps; ++t) {
        const double r    = a + (b - a) * t / (steps - 1);
        const double beta = r * r;
        abar *= 1.0 - beta;
        const auto i = static_cast<std::size_t>(t);
        if (convention == Convention::VariancePreserving) {
            s.alphas_[i] = std::sqrt(abar);
            s.sigmas_[i] = std::sqrt(1.0 - abar);
        } else {
            s.alphas_[i] = 1.0;
            s.sigmas_[i] = std::sqrt((1.0 - abar) / abar);
        }
    }
    return s;
}

NoiseSchedule NoiseSchedule::from_coefficients(std::vector<double> alphas, std::vector<double> sigmas) {
    if (alphas.empty() || alphas.size() != sigmas.size()) throw ParamError("alphas and sigmas must be same non-zero length");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] >= 0.0) || !(sigmas[i] >= 0.0)) throw ParamError("schedule coefficients must be non-negative");
        // signal-to-noise ratio alpha/sigma must not increase with t
        if (i > 0 && alphas[i] * sigmas[i - 1] > alphas[i - 1] * sigmas[i] + 1e-15) {
            throw ParamError("schedule signal-to-noise ratio increases at t=" + std::to_string(i));
        }
    }
    NoiseSchedule s;
    s.alphas_  = std::move(alphas);
    s.sigmas_  = std::move(sigmas);
    const bool unit_alpha = std::all_of(s.alphas_.begin(), s.alphas_.end(), [](double v) { return v == 1.0; });
    s.convention_ = unit_alpha ? Convention::VarianceExploding : Convention::VariancePreserving;
    return s;
}

void NoiseSchedule::check(Timestep t) const {
    if (t < 0 || t >= t_max()) {
        throw TimestepError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(t_max()) + ")");
    }
}

double NoiseSchedule::alpha(Timestep t) const {
    check(t);
    return alphas_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::sigma(Timestep t) const {
    check(t);
    return sigmas_[static_cast<std::size_t>(t)];
}

// ---------------------------------------------------------------------------

std::size_t AttentionRecord::index_of(const std::string& layer_id) const {
    auto it = std::find(layer_ids.begin(), layer_ids.end(), layer_id);
    if (it == layer_ids.end()) throw ParamError("layer '" + layer_id + "' was not captured");
    return static_cast<std::size_t>(it - layer_ids.begin());
}

void FeatureMap::validate() const {
    if (grid.height <= 0 || grid.width <= 0) throw ShapeError("feature map with empty grid");
    if (values.rows() != static_cast<Eigen::Index>(grid.height) * grid.width) {
        throw ShapeError("feature map rows do not match its grid");
    }
}

const char* branch_name(Branch b) {
    switch (b) {
        case Branch::Source: return "source";
        case Branch::Target: return "target";
        case Branch::None: break;
    }
    return "none";
}

void HookRegistry::set(Branch branch, const std::string& layer_id, CrossAttentionHook hook, std::string label) {
    hooks_[{branch, layer_id}] = Slot{std::move(hook), std::move(label)};
}

void HookRegistry::clear(Branch branch, const std::string& layer_id) { hooks_.erase({branch, layer_id}); }

const CrossAttentionHook* HookRegistry::find(Branch branch, const std::string& layer_id) const {
    auto it = hooks_.find({branch, layer_id});
    return it == hooks_.end() ? nullptr : &it->second.hook;
}

bool HookRegistry::any(Branch branch) const {
    return std::any_of(hooks_.begin(), hooks_.end(), [&](const auto& kv) { return kv.first.first == branch; });
}

std::vector<HookRegistry::Entry> HookRegistry::dump() const {
    std::vector<Entry> out;
    for (const auto& [k, slot] : hooks_) out.push_back(Entry{k.first, k.second, slot.label});
    return out;
}

const std::string* HookRegistry::owner(Branch branch) const {
    auto it = owners_.find(branch);
    return it == owners_.end() ? nullptr : &it->second;
}

void HookRegistry::set_owner(Branch branch, std::string signature) { owners_[branch] = std::move(signature); }
void HookRegistry::clear_owner(Branch branch) { owners_.erase(branch); }

// ---------------------------------------------------------------------------
// DenoiserBackend

Latent DenoiserBackend::add_noise(const Latent& z, Timestep t, const Latent& eps) const {
    require_same_shape(z, eps, "add_noise");
    const double a = schedule().alpha(t);
    const double s = schedule().sigma(t);
    Latent out(z.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z[i] + s * eps[i];
    return out;
}

HookRegistry& DenoiserBackend::hooks() {
    if (!supports_hooks()) throw UnsupportedBackend(info().kind + " backend does not expose cross-attention hooks");
    return hooks_;
}

void DenoiserBackend::check_latent(const Latent& z) const {
    if (z.shape() != info().latent) {
        throw ShapeError("latent " + z.shape().str() + " does not match backend latent " + info().latent.str());
    }
}

std::vector<std::string> default_capture_layers(const std::vector<LayerInfo>& layers) {
    std::set<long> sizes;
    for (const auto& l : layers) sizes.insert(static_cast<long>(l.grid.height) * l.grid.width);
    std::set<long> keep;
    for (long s : sizes) {
        if (keep.size() == 2) break;
        keep.insert(s);
    }
    std::vector<std::string> out;
    for (const auto& l : layers) {
        if (keep.count(static_cast<long>(l.grid.height) * l.grid.width)) out.push_back(l.id);
    }
    return out;
}

void softmax_rows(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r)        = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

Matrix cross_attention_weights(const Matrix& features, const Matrix& context, const ProjectionSet& proj) {
    if (features.cols() != proj.wq.rows()) throw ShapeError("feature width does not match query projection");
    if (context.cols() != proj.wk.rows() || context.cols() != proj.wv.rows()) {
        throw ShapeError("context width does not match key/value projections");
    }
    if (proj.wq.cols() != proj.wk.cols()) throw ShapeError("query and key projections disagree on d'");
    if (context.rows() == 0) throw ShapeError("empty attention context");
    const Matrix q = features * proj.wq;
    const Matrix k = context * proj.wk;
    Matrix logits  = (q * k.transpose()) / std::sqrt(static_cast<double>(proj.d_prime()));
    softmax_rows(logits);
    return logits;
}

Matrix cross_attention(const Matrix& features, const Matrix& context, const ProjectionSet& proj) {
    return cross_attention_weights(features, context, proj) * (context * proj.wv);
}

}  // namespace ccswap
