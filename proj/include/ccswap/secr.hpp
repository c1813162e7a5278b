#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ccswap/backbone.hpp"
#include "ccswap/bbox.hpp"

namespace ccswap {

// Scales a box to another grid, rounding outward (floor mins, ceil maxes) and clamping.
// When enlarging, the max edge also reaches the last target cell of the source cell.
BBox resize_bbox(const BBox& bbox, GridSize to);

// Row-stochastic attention of the cropped features over the concept tokens (crop rows x tokens).
Matrix regional_attention_weights(const FeatureMap& feat, const BBox& bbox_f, const TextEmbedding& concept_emb,
                                  const ProjectionSet& proj);

// softmax(Q K^T / sqrt(d')) V for the cropped features; rows in crop raster order.
Matrix regional_attention(const FeatureMap& feat, const BBox& bbox_f, const TextEmbedding& concept_emb,
                          const ProjectionSet& proj);

// `feat` with the bbox region replaced by regional_attention; everything outside is copied.
FeatureMap regional_cross_attention(const FeatureMap& feat, const BBox& bbox_f, const TextEmbedding& concept_emb,
                                    const ProjectionSet& proj);

// Embedding rows of the concept words alone; an empty concept yields the full null sequence.
TextEmbedding concept_embedding(const DenoiserBackend& backend, std::string_view concept_text);

// Owns one branch's installed hooks and removes them on destruction.
class SecrHandle {
public:
    SecrHandle() = default;
    SecrHandle(DenoiserBackend* backend, Branch branch, std::vector<std::string> layers);
    SecrHandle(SecrHandle&& other) noexcept;
    SecrHandle& operator=(SecrHandle&& other) noexcept;
    SecrHandle(const SecrHandle&)            = delete;
    SecrHandle& operator=(const SecrHandle&) = delete;
    ~SecrHandle();

    bool active() const { return backend_ != nullptr; }
    const std::vector<std::string>& layers() const { return layers_; }
    void uninstall();

private:
    DenoiserBackend* backend_ = nullptr;
    Branch branch_            = Branch::None;
    std::vector<std::string> layers_;
};

// Replaces each selected layer's cross-attention output inside the per-layer resized bbox with
// attention over the concept embedding during forward passes of `branch`. An identical repeated install is a
// no-op (inactive handle, warning logged); a different install on a hooked branch is a ContractError.
SecrHandle install_secr(DenoiserBackend& backend, Branch branch, const TextEmbedding& concept_emb, const BBox& bbox,
                        const std::vector<std::string>& layers = {});

// One line per installed hook: branch, layer id, per-layer bbox.
std::string secr_debug_dump(const DenoiserBackend& backend);

}  // namespace ccswap
