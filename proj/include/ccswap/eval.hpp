#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccswap/bbox.hpp"
#include "ccswap/tensor.hpp"

namespace ccswap {

// Declared value range of pixel arrays; also the data range used by PSNR and SSIM.
enum class PixelRange { Unit, Byte, Symmetric };

double data_range(PixelRange r);  // 1, 255, 2
PixelRange parse_pixel_range(const std::string& s);
const char* pixel_range_name(PixelRange r);

struct FgBg {
    Image fg;  // crop of the bbox
    Image bg;  // whole image, bbox zeroed
};

// Throws ShapeError when the bbox grid is not the image grid.
FgBg split_fg_bg(const Image& image, const BBox& gt_bbox);

// Image with the bbox region zeroed.
Image zero_region(const Image& image, const BBox& bbox);

double mse(const Image& a, const Image& b);
// +inf for identical images.
double psnr(const Image& a, const Image& b, PixelRange range);

// Mean windowed SSIM: uniform 7x7 window (shrunk to the largest odd size that fits),
// unbiased window variances, K1 = 0.01, K2 = 0.03, valid windows only, averaged over channels.
double ssim(const Image& a, const Image& b, PixelRange range, int window = 7);

// Perceptual distance such as LPIPS.
class PerceptualClient {
public:
    virtual ~PerceptualClient() = default;
    virtual double distance(const Image& a, const Image& b) = 0;
};

// Joint image-text embedding such as CLIP.
class EmbeddingClient {
public:
    virtual ~EmbeddingClient() = default;
    virtual Vector embed_image(const Image& image) = 0;
    virtual Vector embed_text(const std::string& text) = 0;
};

// Deterministic stand-ins so the harness runs without a model.
//  image: 8x8 area-averaged grayscale thumbnail, mean-removed, plus a bias term
//  text:  hashed bag of words in the same 65-dim space
class StubEmbeddingClient final : public EmbeddingClient {
public:
    Vector embed_image(const Image& image) override;
    Vector embed_text(const std::string& text) override;
};

// Returns registered vectors; unregistered inputs throw ScorerUnavailable.
class FixedEmbeddingClient final : public EmbeddingClient {
public:
    void set_image(const Image& image, Vector v);
    void set_text(const std::string& text, Vector v);
    Vector embed_image(const Image& image) override;
    Vector embed_text(const std::string& text) override;

private:
    static std::uint64_t key(const Image& image);
    std::vector<std::pair<std::uint64_t, Vector>> images_;
    std::vector<std::pair<std::string, Vector>> texts_;
};

// Mean absolute pixel difference; stands in for LPIPS in tests.
class StubPerceptualClient final : public PerceptualClient {
public:
    double distance(const Image& a, const Image& b) override;
};

// JSON-over-HTTP scorer service.
//   POST /embed/image {"shape":[c,h,w],"data":[...]}      -> {"embedding":[...]}
//   POST /embed/text  {"text":"..."}                      -> {"embedding":[...]}
//   POST /lpips       {"a":{shape,data},"b":{shape,data}} -> {"distance":x}
// Transport or protocol failures throw ScorerUnavailable.
class HttpScorerClient final : public EmbeddingClient, public PerceptualClient {
public:
    HttpScorerClient(std::string host, int port, int timeout_s = 30);
    Vector embed_image(const Image& image) override;
    Vector embed_text(const std::string& text) override;
    double distance(const Image& a, const Image& b) override;

    // "http://host:port"
    static std::unique_ptr<HttpScorerClient> from_url(const std::string& url);

private:
    nlohmann::json post(const std::string& route, const nlohmann::json& body);
    std::string host_;
    int port_;
    int timeout_s_;
};

// Cosine similarity times 100. Throws ParamError for zero or mismatched vectors.
double cosine_score(const Vector& a, const Vector& b);

struct BackgroundMetrics {
    double psnr = 0.0;
    std::optional<double> lpips;  // absent without a perceptual client
    double mse  = 0.0;
    double ssim = 0.0;
};

// Metrics of two backgrounds; callers zero the foreground in both first.
BackgroundMetrics background_metrics(const Image& a, const Image& b, PixelRange range,
                                     PerceptualClient* lpips = nullptr);

struct ClipScores {
    double clip_i = 0.0;
    double clip_t = 0.0;
};

// clip_i: mean cosine between the fg crop and each whole concept image; clip_t: whole image vs prompt.
// Throws ScorerUnavailable without a client.
ClipScores clip_scores(const Image& generated, const std::vector<Image>& concept_images,
                       const std::string& target_prompt, const BBox& fg_bbox, EmbeddingClient* client);

// ---------------------------------------------------------------------------
// Benchmark layout
//   <root>/concepts/<name>/*.{png,ppm,pgm}
//   <root>/swaps/<stem>.{png,ppm,pgm}
//   <root>/gt_bboxes/<stem>.json          BBox on the image grid
//   <root>/prompts.tsv                    swap    <stem> <source prompt> <source concept word>
//                                         concept <name> <token>         <class word>

struct ConceptEntry {
    std::string name;
    std::string token;
    std::string class_word;
    std::vector<std::filesystem::path> images;
};

struct SwapEntry {
    std::string stem;
    std::filesystem::path image;
    std::filesystem::path gt_bbox;
    std::string source_prompt;
    std::string source_concept;
};

struct BenchLayout {
    std::filesystem::path root;
    std::vector<ConceptEntry> concepts;
    std::vector<SwapEntry> swaps;

    // Throws LayoutError naming the first missing piece.
    static BenchLayout load(const std::filesystem::path& root);
    void validate() const;
};

// Source prompt with the source concept word replaced by "<token> <class word>".
std::string target_prompt_for(const SwapEntry& swap, const ConceptEntry& concept_entry);

struct BenchCase {
    const ConceptEntry* concept_entry = nullptr;
    const SwapEntry* swap            = nullptr;
    Image source;
    BBox gt_bbox;
    std::string target_prompt;
    std::uint64_t seed = 0;
};

// Produces the edited image for one case. Called concurrently when jobs > 1.
using MethodRunner = std::function<Image(const BenchCase&)>;

struct MetricsRow {
    std::string concept_name;
    std::string stem;
    std::optional<double> clip_i;
    double psnr = 0.0;
    std::optional<double> lpips;
    double mse  = 0.0;
    double ssim = 0.0;
    std::optional<double> clip_t;
    double time_s = 0.0;
};

struct MetricsReport {
    std::optional<double> clip_i;
    double psnr = 0.0;
    std::optional<double> lpips;
    double mse  = 0.0;
    double ssim = 0.0;
    std::optional<double> clip_t;
    double time_s = 0.0;
    std::vector<MetricsRow> per_image;
    std::vector<std::string> failures;  // "<concept>/<stem>: <error>"
};

struct BenchOptions {
    PixelRange range = PixelRange::Unit;
    int jobs         = 1;
    std::uint64_t seed = 0;
    EmbeddingClient* clip       = nullptr;  // absent: CLIP columns omitted
    PerceptualClient* perceptual = nullptr;  // absent: LPIPS omitted
};

// Every (concept, swap image) pair in layout order. Failing pairs are logged and excluded.
// Writes <out>.json and <out>.txt when out_path is given.
MetricsReport run_benchmark(const BenchLayout& layout, const MethodRunner& runner, const BenchOptions& options,
                            const std::optional<std::filesystem::path>& out_path = std::nullopt);

// +inf PSNR serializes as "inf". Wall-clock fields are omitted when include_time is false.
nlohmann::json report_to_json(const MetricsReport& report, bool include_time = true);

// Aligned columns: CLIP-I, PSNR, LPIPSx10^3, MSEx10^4, SSIMx10^2, CLIP-T, Time(s).
std::string format_report_table(const MetricsReport& report, const std::string& method = "method");

}  // namespace ccswap
