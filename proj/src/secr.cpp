#include "ccswap/secr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ccswap/error.hpp"

namespace ccswap {
namespace {

int scale_min(int v, int from, int to) { return static_cast<int>(std::floor(static_cast<double>(v) * to / from)); }

int scale_max(int v, int from, int to) {
    const double r = static_cast<double>(to) / from;
    const int a    = static_cast<int>(std::ceil(v * r));
    const int b    = static_cast<int>(std::ceil((v + 1) * r)) - 1;
    return std::max(a, b);
}

void check_bbox_on(const FeatureMap& feat, const BBox& bbox_f) {
    feat.validate();
    bbox_f.validate();
    if (bbox_f.grid != feat.grid) throw ShapeError("bbox " + bbox_f.str() + " is not on the feature grid");
}

Matrix crop_rows(const FeatureMap& feat, const BBox& b) {
    Matrix crop(static_cast<Eigen::Index>(b.rows()) * b.cols(), feat.values.cols());
    Eigen::Index k = 0;
    for (int y = b.row_min; y <= b.row_max; ++y) {
        for (int x = b.col_min; x <= b.col_max; ++x) {
            crop.row(k++) = feat.values.row(static_cast<Eigen::Index>(y) * feat.grid.width + x);
        }
    }
    return crop;
}

void paste_rows(Matrix& dst, GridSize grid, const BBox& b, const Matrix& rows) {
    Eigen::Index k = 0;
    for (int y = b.row_min; y <= b.row_max; ++y) {
        for (int x = b.col_min; x <= b.col_max; ++x) {
            dst.row(static_cast<Eigen::Index>(y) * grid.width + x) = rows.row(k++);
        }
    }
}

}  // namespace

BBox resize_bbox(const BBox& bbox, GridSize to) {
    bbox.validate();
    if (to.height <= 0 || to.width <= 0) throw ShapeError("target grid must be positive");
    if (bbox.grid == to) return bbox;
    BBox out;
    out.grid    = to;
    out.row_min = std::clamp(scale_min(bbox.row_min, bbox.grid.height, to.height), 0, to.height - 1);
    out.col_min = std::clamp(scale_min(bbox.col_min, bbox.grid.width, to.width), 0, to.width - 1);
    out.row_max = std::clamp(scale_max(bbox.row_max, bbox.grid.height, to.height), out.row_min, to.height - 1);
    out.col_max = std::clamp(scale_max(bbox.col_max, bbox.grid.width, to.width), out.col_min, to.width - 1);
    return out;
}

Matrix regional_attention_weights(const FeatureMap& feat, const BBox& bbox_f, const TextEmbedding& concept_emb,
                                  const ProjectionSet& proj) {
    check_bbox_on(feat, bbox_f);
    if (concept_emb.length() == 0) throw ShapeError("empty concept embedding");
    return cross_attention_weights(crop_rows(feat, bbox_f), concept_emb.values, proj);
}

Matrix regional_attention(const FeatureMap& feat, const BBox& bbox_f, const TextEmbedding& concept_emb,
                          const ProjectionSet& proj) {
    return regional_attention_weights(feat, bbox_f, concept_emb, proj) * (concept_emb.values * proj.wv);
}

FeatureMap regional_cross_attention(const FeatureMap& feat, const BBox& bbox_f, const TextEmbedding& concept_emb,
                                    const ProjectionSet& proj) {
    const Matrix region = regional_attention(feat, bbox_f, concept_emb, proj);
    if (region.cols() != feat.values.cols()) {
        throw ShapeError("value width " + std::to_string(region.cols()) + " differs from feature channels " +
                         std::to_string(feat.values.cols()));
    }
    FeatureMap out = feat;
    paste_rows(out.values, out.grid, bbox_f, region);
    return out;
}

TextEmbedding concept_embedding(const DenoiserBackend& backend, std::string_view concept_text) {
    TextEmbedding full = backend.embed_prompt(concept_text);
    const auto rows    = full.word_rows();
    if (rows.empty()) return full;
    return full.select_rows(rows);
}

// ---------------------------------------------------------------------------

SecrHandle::SecrHandle(DenoiserBackend* backend, Branch branch, std::vector<std::string> layers)
    : backend_(backend), branch_(branch), layers_(std::move(layers)) {}

SecrHandle::SecrHandle(SecrHandle&& other) noexcept
    : backend_(std::exchange(other.backend_, nullptr)), branch_(other.branch_), layers_(std::move(other.layers_)) {}

SecrHandle& SecrHandle::operator=(SecrHandle&& other) noexcept {
    if (this != &other) {
        uninstall();
        backend_ = std::exchange(other.backend_, nullptr);
        branch_  = other.branch_;
        layers_  = std::move(other.layers_);
    }
    return *this;
}

SecrHandle::~SecrHandle() { uninstall(); }

void SecrHandle::uninstall() {
    if (backend_ == nullptr) return;
    HookRegistry& reg = backend_->hooks();
    for (const auto& id : layers_) reg.clear(branch_, id);
    reg.clear_owner(branch_);
    backend_ = nullptr;
}

SecrHandle install_secr(DenoiserBackend& backend, Branch branch, const TextEmbedding& concept_emb, const BBox& bbox,
                        const std::vector<std::string>& layers) {
    if (branch == Branch::None) throw ParamError("SECR must target the source or the target branch");
    HookRegistry& reg = backend.hooks();  // throws UnsupportedBackend
    bbox.validate();
    if (concept_emb.length() == 0) throw ShapeError("empty concept embedding");

    std::vector<std::string> ids = layers;
    if (ids.empty()) {
        for (const auto& l : backend.layers()) ids.push_back(l.id);
    }

    std::ostringstream sig;
    sig << concept_emb.key() << '|' << bbox.str();
    for (const auto& id : ids) sig << '|' << id;

    if (const std::string* owner = reg.owner(branch)) {
        if (*owner == sig.str()) {
            spdlog::warn("SECR already installed on the {} branch with the same concept and bbox; ignoring",
                         branch_name(branch));
            return SecrHandle{};
        }
        throw ContractError(std::string("a different SECR hook is already installed on the ") + branch_name(branch) +
                            " branch");
    }

    // resolve every layer first so a bad id leaves the registry untouched
    std::vector<BBox> boxes;
    for (const auto& id : ids) {
        auto info = std::find_if(backend.layers().begin(), backend.layers().end(),
                                 [&](const LayerInfo& l) { return l.id == id; });
        if (info == backend.layers().end()) throw ParamError("unknown attention layer '" + id + "'");
        boxes.push_back(resize_bbox(bbox, info->grid));
    }

    for (std::size_t i = 0; i < ids.size(); ++i) {
        const BBox layer_box = boxes[i];
        auto hook            = [concept_emb, layer_box](const CrossAttentionCall& call) {
            Matrix out          = call.dense_output;
            const Matrix region = regional_attention(call.features, layer_box, concept_emb, call.projections);
            if (region.cols() != out.cols()) throw ShapeError("regional attention width mismatch");
            paste_rows(out, call.features.grid, layer_box, region);
            return out;
        };
        reg.set(branch, ids[i], std::move(hook), layer_box.str());
    }
    reg.set_owner(branch, sig.str());
    return SecrHandle{&backend, branch, std::move(ids)};
}

std::string secr_debug_dump(const DenoiserBackend& backend) {
    std::ostringstream os;
    for (const auto& e : backend.hooks().dump()) os << branch_name(e.branch) << ' ' << e.layer_id << ' ' << e.label << '\n';
    return os.str();
}

}  // namespace ccswap
