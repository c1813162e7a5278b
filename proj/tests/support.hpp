#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ccswap/backbone.hpp"
#include "ccswap/distill.hpp"
#include "ccswap/image_io.hpp"
#include "ccswap/secr.hpp"
#include "ccswap/swap_config.hpp"
#include "ccswap/tensor.hpp"
#include "ccswap/toy_backend.hpp"

namespace ccswap::testing {

inline ToyConfig toy_config(std::uint64_t seed = 0) {
    ToyConfig c;
    c.seed = seed;
    return c;
}

inline Image random_image(const Shape3& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(shape);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = u(rng);
    return img;
}

inline Latent random_latent(const Shape3& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Latent z(shape);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = n(rng);
    return z;
}

inline Image toy_image(const ToyBackend& backend, std::uint64_t seed) {
    return random_image(backend.info().image_shape(), seed);
}

// A swap on the default toy: "cat" planted at `rect`, target uses token "sks".
inline SwapConfig cat_to_dog(std::uint64_t seed = 0) {
    SwapConfig c;
    c.source_prompt  = "a photo of a cat";
    c.target_prompt  = "a photo of a sks dog";
    c.source_concept = "cat";
    c.target_concept = "sks dog";
    c.seed           = seed;
    return c;
}

// The toy prediction is z_t - E(cond) for a hook- and guidance-dependent offset E, so
// E = -(guided prediction at z_t = 0). The masked DDS fixed point inside the box is z0 + E_T - E_S.
inline Latent toy_offset(DenoiserBackend& backend, const BranchInput& b) {
    const Latent zero(backend.info().latent);
    const Latent pred = guided_prediction(backend, zero, 500, b);
    Latent out(pred.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -pred[i];
    return out;
}

// Expected swap output latent: z0 inside the box moved by E_T - E_S, z0 untouched outside.
inline Latent swap_fixed_point(ToyBackend& backend, const Latent& z0, const SwapConfig& cfg, const BBox& bbox) {
    const TextEmbedding uncond = backend.embed_prompt("");
    const TextEmbedding src    = backend.embed_prompt(cfg.source_prompt);
    const TextEmbedding tgt    = backend.embed_prompt(cfg.target_prompt);
    SecrHandle hs;
    SecrHandle ht;
    if (cfg.secr_source) {
        hs = install_secr(backend, Branch::Source, concept_embedding(backend, cfg.source_concept), bbox, cfg.secr_layers);
    }
    if (cfg.secr_target) {
        ht = install_secr(backend, Branch::Target, concept_embedding(backend, cfg.target_concept), bbox, cfg.secr_layers);
    }
    const Latent es = toy_offset(backend, BranchInput{z0, src, uncond, cfg.guidance, Branch::Source});
    const Latent et = toy_offset(backend, BranchInput{z0, tgt, uncond, cfg.guidance, Branch::Target});
    Latent out = z0;
    for (int c = 0; c < z0.channels(); ++c) {
        for (int y = 0; y < z0.height(); ++y) {
            for (int x = 0; x < z0.width(); ++x) {
                if (bbox.contains(y, x)) out.at(c, y, x) += et.at(c, y, x) - es.at(c, y, x);
            }
        }
    }
    return out;
}

// Largest |a-b| restricted to positions inside (or outside) a box.
inline double max_diff_where(const Latent& a, const Latent& b, const BBox& box, bool inside) {
    double m = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        for (int y = 0; y < a.height(); ++y) {
            for (int x = 0; x < a.width(); ++x) {
                if (box.contains(y, x) == inside) m = std::max(m, std::abs(a.at(c, y, x) - b.at(c, y, x)));
            }
        }
    }
    return m;
}

inline bool bit_equal_outside(const Latent& a, const Latent& b, const BBox& box) {
    for (int c = 0; c < a.channels(); ++c) {
        for (int y = 0; y < a.height(); ++y) {
            for (int x = 0; x < a.width(); ++x) {
                if (!box.contains(y, x) && a.at(c, y, x) != b.at(c, y, x)) return false;
            }
        }
    }
    return true;
}

// Self-deleting scratch directory.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ccswap_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&)            = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// 2 concepts x 3 swap images of 1x32x32, boxes on the image grid.
inline void write_mini_layout(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    fs::create_directories(root / "concepts" / "dog1");
    fs::create_directories(root / "concepts" / "teapot2");
    fs::create_directories(root / "swaps");
    fs::create_directories(root / "gt_bboxes");
    const Shape3 shape{1, 32, 32};
    write_image(root / "concepts" / "dog1" / "00.png", random_image(shape, 11));
    write_image(root / "concepts" / "dog1" / "01.pgm", random_image(shape, 12));
    write_image(root / "concepts" / "teapot2" / "00.png", random_image(shape, 21));
    std::ofstream tsv(root / "prompts.tsv");
    tsv << "# kind\tname\tprompt or token\tconcept or class\n";
    tsv << "concept\tdog1\tsks\tdog\n";
    tsv << "concept\tteapot2\tzwx\tteapot\n";
    const char* stems[]   = {"cat_sofa", "cup_table", "cat_grass"};
    const char* prompts[] = {"a cat on a sofa", "a cup on a table", "a cat in the grass"};
    const char* words[]   = {"cat", "cup", "cat"};
    const BBox boxes[]    = {{8, 8, 23, 19, {32, 32}}, {4, 10, 15, 27, {32, 32}}, {16, 0, 31, 13, {32, 32}}};
    for (int i = 0; i < 3; ++i) {
        write_image(root / "swaps" / (std::string(stems[i]) + ".png"), random_image(shape, 100 + i));
        nlohmann::json j = boxes[i];
        std::ofstream(root / "gt_bboxes" / (std::string(stems[i]) + ".json")) << j.dump();
        tsv << "swap\t" << stems[i] << "\t" << prompts[i] << "\t" << words[i] << "\n";
    }
}

}  // namespace ccswap::testing
