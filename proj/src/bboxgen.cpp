#include "ccswap/bboxgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ccswap/error.hpp"
#include "ccswap/rng.hpp"

namespace ccswap {

Matrix refine_attention(const Matrix& self_map, const Matrix& cross_map, double alpha, RefineMode mode) {
    if (!(alpha >= 1.0)) throw ParamError("alpha must be >= 1");
    if (self_map.rows() != self_map.cols()) throw ShapeError("self-attention map must be square");
    if (self_map.cols() != cross_map.rows()) {
        throw ShapeError("self map is " + std::to_string(self_map.rows()) + "x" + std::to_string(self_map.cols()) +
                         " but cross map has " + std::to_string(cross_map.rows()) + " rows");
    }
    const Matrix powered = cross_map.array().pow(alpha).matrix();
    if (mode == RefineMode::Elementwise) return self_map.diagonal().asDiagonal() * powered;
    return self_map * powered;
}

Matrix token_columns_mean(const Matrix& refined, const std::vector<int>& token_indices, GridSize layer_dims) {
    if (token_indices.empty()) throw ParamError("no concept tokens selected");
    if (static_cast<Eigen::Index>(layer_dims.height) * layer_dims.width != refined.rows()) {
        throw ShapeError("layer grid " + std::to_string(layer_dims.height) + "x" + std::to_string(layer_dims.width) +
                         " does not match " + std::to_string(refined.rows()) + " attention rows");
    }
    Vector acc = Vector::Zero(refined.rows());
    for (int idx : token_indices) {
        if (idx < 0 || idx >= refined.cols()) throw ParamError("token index " + std::to_string(idx) + " out of range");
        acc += refined.col(idx);
    }
    acc /= static_cast<double>(token_indices.size());
    Matrix out(layer_dims.height, layer_dims.width);
    for (Eigen::Index i = 0; i < acc.size(); ++i) out.data()[i] = acc[i];
    return out;
}

SaliencyMap normalize_saliency(Matrix values) {
    const double lo    = values.minCoeff();
    const double hi    = values.maxCoeff();
    const double scale = std::max({std::abs(lo), std::abs(hi), 1e-300});
    // rounding noise on a flat map must not be stretched into structure
    if (!(hi - lo > 1e-9 * scale)) return SaliencyMap{std::move(values), false};
    values = (values.array() - lo) / (hi - lo);
    return SaliencyMap{std::move(values), true};
}

SaliencyMap token_saliency(const Matrix& refined, const std::vector<int>& token_indices, GridSize layer_dims) {
    return normalize_saliency(token_columns_mean(refined, token_indices, layer_dims));
}

Mask threshold_mask(const SaliencyMap& map, double beta) {
    if (!map.normalized) throw DegenerateAttention("saliency map is constant; no region stands out");
    if (!(beta > 0.0 && beta < 1.0)) throw ParamError("beta must lie in (0, 1)");
    return map.values.array() >= beta;
}

BBox mask_to_bbox(const Mask& mask) {
    const GridSize grid{static_cast<int>(mask.rows()), static_cast<int>(mask.cols())};
    BBox b{grid.height, grid.width, -1, -1, grid};
    bool any = false;
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            if (!mask(r, c)) continue;
            any       = true;
            b.row_min = std::min(b.row_min, r);
            b.col_min = std::min(b.col_min, c);
            b.row_max = std::max(b.row_max, r);
            b.col_max = std::max(b.col_max, c);
        }
    }
    if (!any) throw EmptyMask("mask has no foreground points");
    return b;
}

Matrix resize_bilinear(const Matrix& map, GridSize to) {
    const int h = static_cast<int>(map.rows());
    const int w = static_cast<int>(map.cols());
    if (h == to.height && w == to.width) return map;
    Matrix out(to.height, to.width);
    auto source_coord = [](int i, int in, int outn, int& i0, int& i1, double& frac) {
        double s = (i + 0.5) * static_cast<double>(in) / outn - 0.5;
        s        = std::clamp(s, 0.0, static_cast<double>(in - 1));
        i0       = static_cast<int>(std::floor(s));
        i1       = std::min(i0 + 1, in - 1);
        frac     = s - i0;
    };
    for (int y = 0; y < to.height; ++y) {
        int y0, y1;
        double fy;
        source_coord(y, h, to.height, y0, y1, fy);
        for (int x = 0; x < to.width; ++x) {
            int x0, x1;
            double fx;
            source_coord(x, w, to.width, x0, x1, fx);
            const double top    = map(y0, x0) * (1.0 - fx) + map(y0, x1) * fx;
            const double bottom = map(y1, x0) * (1.0 - fx) + map(y1, x1) * fx;
            out(y, x)           = top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

BBoxDetection detect_bbox(DenoiserBackend& backend, const Latent& source, const std::string& source_prompt,
                          const std::string& concept_word, const SwapConfig& cfg) {
    const TextEmbedding emb           = backend.embed_prompt(source_prompt);
    const std::vector<int> token_rows = emb.indices_of(concept_word);
    const std::vector<std::string> layer_ids =
        cfg.capture_layers.empty() ? default_capture_layers(backend.layers()) : cfg.capture_layers;
    if (layer_ids.empty()) throw ParamError("no attention layers selected for capture");

    const GridSize latent_grid{source.height(), source.width()};
    Matrix fused = Matrix::Zero(latent_grid.height, latent_grid.width);
    int maps     = 0;

    Rng rng(derive_seed(cfg.seed, "bbox"));
    BBoxDetection out;
    for (Timestep t : cfg.bbox_timesteps) {
        const Latent eps = rng.normal_like(source.shape());
        const Latent z_t = backend.add_noise(source, t, eps);
        const auto pred  = backend.predict_noise(z_t, t, emb, /*capture=*/true);
        ++out.passes;
        const AttentionRecord& rec = pred.attention.value();
        for (const auto& id : layer_ids) {
            const std::size_t i  = rec.index_of(id);
            const Matrix refined = refine_attention(rec.self[i], rec.cross[i], cfg.alpha, cfg.refine_mode);
            fused += resize_bilinear(token_columns_mean(refined, token_rows, rec.layer_dims[i]), latent_grid);
            ++maps;
        }
    }
    fused /= static_cast<double>(maps);

    out.saliency = normalize_saliency(std::move(fused));
    out.mask     = threshold_mask(out.saliency, cfg.beta);
    out.bbox     = mask_to_bbox(out.mask);
    return out;
}

BBox generate_bbox(DenoiserBackend& backend, const Latent& source, const std::string& source_prompt,
                   const std::string& concept_word, const SwapConfig& cfg) {
    return detect_bbox(backend, source, source_prompt, concept_word, cfg).bbox;
}

}  // namespace ccswap
