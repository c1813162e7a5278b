#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccswap/adapter_backend.hpp"
#include "ccswap/pipeline.hpp"
#include "ccswap/swap_config.hpp"
#include "ccswap/toy_backend.hpp"

namespace ccswap {

// Everything a command needs. Serialized as flat `key = value` lines:
//
//   # comment
//   lambda = 5
//   source_prompt = a photo of a cat
//   toy.plant = cat@4,4,11,11; hat@0,0,3,15
//
// Unknown keys and malformed values throw ConfigError.
struct RunConfig {
    SwapConfig swap;
    std::string bbox;  // "r0,c0,r1,c1" on the latent grid; empty: generated

    std::string concept_token;  // empty: first word of target_concept
    std::string concept_checkpoint;

    std::string backend = "toy";  // toy | diffusion-adapter
    ToyConfig toy;
    std::string toy_plant;      // "word@r0,c0,r1,c1; ..." on the toy latent grid
    bool toy_auto_size = true;  // toy grid follows the source image when not set explicitly
    AdapterConfig adapter;

    std::string source_image;
    std::string output;

    // bench
    std::string bench_root;
    std::string runner = "swap";  // swap | identity
    std::string scorer = "none";  // none | stub | http://host:port
    std::string pixel_range = "unit";
    int jobs = 1;

    // accel-demo
    std::string method = "sds";
    std::vector<int> lambdas{1, 3, 5};
};

// Every key in serialization order.
const std::vector<std::string>& config_keys();

// Applies one `key=value`. Throws ConfigError.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses flat text on top of `cfg`. `origin` prefixes error messages.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");

// Loads a flat config file, or the "config" object of a JSON sidecar.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Canonical value text of a key; parse(serialize(x)) reproduces x.
std::string get_setting(const RunConfig& cfg, const std::string& key);
std::string serialize_config(const RunConfig& cfg);
nlohmann::json config_to_json(const RunConfig& cfg);

// Sizes the toy grid from an image when toy_auto_size is set.
void fit_toy_to_image(RunConfig& cfg, const Shape3& image_shape);

std::unique_ptr<DenoiserBackend> make_backend(const RunConfig& cfg);

// cfg.swap with the bbox override resolved on the backend's latent grid, validated.
// Throws ConfigError.
SwapConfig effective_swap_config(const RunConfig& cfg, const DenoiserBackend& backend);

ConceptSpec concept_spec(const RunConfig& cfg);

}  // namespace ccswap
