#pragma once

#include <string>
#include <vector>

#include "ccswap/backbone.hpp"
#include "ccswap/bbox.hpp"
#include "ccswap/swap_config.hpp"
#include "ccswap/tensor.hpp"

namespace ccswap {

struct SaliencyMap {
    Matrix values;  // h x w
    bool normalized = false;

    GridSize grid() const { return {static_cast<int>(values.rows()), static_cast<int>(values.cols())}; }
};

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// self_map * cross_map^alpha (elementwise power). Elementwise mode scales each row of the
// powered cross map by the position's self-attention weight instead of propagating it.
Matrix refine_attention(const Matrix& self_map, const Matrix& cross_map, double alpha,
                        RefineMode mode = RefineMode::MatrixProduct);

// Mean of the selected token columns reshaped to the layer grid, without normalization.
Matrix token_columns_mean(const Matrix& refined, const std::vector<int>& token_indices, GridSize layer_dims);

// Min-max normalization; constant maps come back with normalized = false.
SaliencyMap normalize_saliency(Matrix values);

SaliencyMap token_saliency(const Matrix& refined, const std::vector<int>& token_indices, GridSize layer_dims);

// values >= beta. Throws DegenerateAttention for un-normalized maps.
Mask threshold_mask(const SaliencyMap& map, double beta);

// Tight rectangle around the foreground. Throws EmptyMask.
BBox mask_to_bbox(const Mask& mask);

// Bilinear resampling with half-pixel centres and clamped borders.
Matrix resize_bilinear(const Matrix& map, GridSize to);

struct BBoxDetection {
    BBox bbox;
    SaliencyMap saliency;  // fused, normalized, on the latent grid
    Mask mask;
    int passes = 0;
};

// Capture passes on the noised source latent at cfg.bbox_timesteps, fused refined saliency
// of `concept_word`, thresholded at cfg.beta. The bbox lives on the latent grid.
BBoxDetection detect_bbox(DenoiserBackend& backend, const Latent& source, const std::string& source_prompt,
                          const std::string& concept_word, const SwapConfig& cfg);

BBox generate_bbox(DenoiserBackend& backend, const Latent& source, const std::string& source_prompt,
                   const std::string& concept_word, const SwapConfig& cfg);

}  // namespace ccswap
