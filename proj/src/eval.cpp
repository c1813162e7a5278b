#include "ccswap/eval.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ccswap/backbone.hpp"
#include "ccswap/bboxgen.hpp"
#include "ccswap/error.hpp"
#include "ccswap/image_io.hpp"
#include "ccswap/secr.hpp"

namespace ccswap {
namespace fs = std::filesystem;
using nlohmann::json;

double data_range(PixelRange r) {
    switch (r) {
        case PixelRange::Unit: return 1.0;
        case PixelRange::Byte: return 255.0;
        case PixelRange::Symmetric: return 2.0;
    }
    return 1.0;
}

PixelRange parse_pixel_range(const std::string& s) {
    if (s == "unit") return PixelRange::Unit;
    if (s == "byte") return PixelRange::Byte;
    if (s == "symmetric") return PixelRange::Symmetric;
    throw ParamError("unknown pixel range '" + s + "' (unit | byte | symmetric)");
}

const char* pixel_range_name(PixelRange r) {
    switch (r) {
        case PixelRange::Unit: return "unit";
        case PixelRange::Byte: return "byte";
        case PixelRange::Symmetric: return "symmetric";
    }
    return "unit";
}

namespace {

void require_image_grid(const Image& image, const BBox& bbox) {
    bbox.validate();
    if (bbox.grid != GridSize{image.height(), image.width()}) {
        throw ShapeError("bbox " + bbox.str() + " is not on the " + std::to_string(image.height()) + "x" +
                         std::to_string(image.width()) + " image grid");
    }
}

Image crop(const Image& image, const BBox& b) {
    Image out(Shape3{image.channels(), b.rows(), b.cols()});
    for (int c = 0; c < image.channels(); ++c)
        for (int y = 0; y < b.rows(); ++y)
            for (int x = 0; x < b.cols(); ++x) out.at(c, y, x) = image.at(c, b.row_min + y, b.col_min + x);
    return out;
}

}  // namespace

Image zero_region(const Image& image, const BBox& bbox) {
    require_image_grid(image, bbox);
    Image out = image;
    for (int c = 0; c < image.channels(); ++c)
        for (int y = bbox.row_min; y <= bbox.row_max; ++y)
            for (int x = bbox.col_min; x <= bbox.col_max; ++x) out.at(c, y, x) = 0.0;
    return out;
}

FgBg split_fg_bg(const Image& image, const BBox& gt_bbox) {
    require_image_grid(image, gt_bbox);
    return FgBg{crop(image, gt_bbox), zero_region(image, gt_bbox)};
}

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b, PixelRange range) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    const double peak = data_range(range);
    return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Image& a, const Image& b, PixelRange range, int window) {
    require_same_shape(a, b, "ssim");
    if (window < 1 || window % 2 == 0) throw ParamError("ssim window must be a positive odd number");
    int win = std::min({window, a.height(), a.width()});
    if (win % 2 == 0) --win;

    const double L  = data_range(range);
    const double c1 = (0.01 * L) * (0.01 * L);
    const double c2 = (0.03 * L) * (0.03 * L);
    const double np = static_cast<double>(win) * win;
    const double cov_norm = np > 1 ? np / (np - 1.0) : 1.0;

    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double channel_sum = 0.0;
        int count          = 0;
        for (int y0 = 0; y0 + win <= a.height(); ++y0) {
            for (int x0 = 0; x0 + win <= a.width(); ++x0) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int y = y0; y < y0 + win; ++y) {
                    for (int x = x0; x < x0 + win; ++x) {
                        const double u = a.at(c, y, x);
                        const double v = b.at(c, y, x);
                        sx += u;
                        sy += v;
                        sxx += u * u;
                        syy += v * v;
                        sxy += u * v;
                    }
                }
                const double ux  = sx / np;
                const double uy  = sy / np;
                const double vx  = cov_norm * (sxx / np - ux * ux);
                const double vy  = cov_norm * (syy / np - uy * uy);
                const double vxy = cov_norm * (sxy / np - ux * uy);
                const double num = (2 * ux * uy + c1) * (2 * vxy + c2);
                const double den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
                channel_sum += num / den;
                ++count;
            }
        }
        total += channel_sum / count;
    }
    return total / a.channels();
}

// ---------------------------------------------------------------------------

double cosine_score(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ParamError("embedding sizes differ");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw ParamError("zero embedding");
    return 100.0 * a.dot(b) / (na * nb);
}

namespace {
constexpr int kStubSide = 8;
constexpr int kStubDim  = kStubSide * kStubSide + 1;

std::uint64_t image_key(const Image& image) {
    const auto& s   = image.shape();
    std::uint64_t h = fnv1a(std::string_view(reinterpret_cast<const char*>(&s), sizeof s));
    const auto vals = image.values();
    return fnv1a(std::string_view(reinterpret_cast<const char*>(vals.data()), vals.size_bytes()), h);
}
}  // namespace

Vector StubEmbeddingClient::embed_image(const Image& image) {
    Matrix gray = Matrix::Zero(image.height(), image.width());
    for (int c = 0; c < image.channels(); ++c)
        for (int y = 0; y < image.height(); ++y)
            for (int x = 0; x < image.width(); ++x) gray(y, x) += image.at(c, y, x) / image.channels();
    const Matrix thumb = resize_bilinear(gray, GridSize{kStubSide, kStubSide});
    const double mean  = thumb.mean();
    Vector v(kStubDim);
    for (int i = 0; i < kStubSide * kStubSide; ++i) v[i] = thumb(i / kStubSide, i % kStubSide) - mean;
    v[kStubDim - 1] = 1.0;
    return v;
}

Vector StubEmbeddingClient::embed_text(const std::string& text) {
    Vector v = Vector::Zero(kStubDim);
    for (const auto& w : split_words(text)) v[static_cast<Eigen::Index>(fnv1a(w) % (kStubDim - 1))] += 1.0;
    v[kStubDim - 1] = 1.0;
    return v;
}

std::uint64_t FixedEmbeddingClient::key(const Image& image) { return image_key(image); }

void FixedEmbeddingClient::set_image(const Image& image, Vector v) { images_.emplace_back(key(image), std::move(v)); }
void FixedEmbeddingClient::set_text(const std::string& text, Vector v) { texts_.emplace_back(text, std::move(v)); }

Vector FixedEmbeddingClient::embed_image(const Image& image) {
    const auto k = key(image);
    for (auto it = images_.rbegin(); it != images_.rend(); ++it)
        if (it->first == k) return it->second;
    throw ScorerUnavailable("no fixed embedding registered for a " + image.shape().str() + " image");
}

Vector FixedEmbeddingClient::embed_text(const std::string& text) {
    for (auto it = texts_.rbegin(); it != texts_.rend(); ++it)
        if (it->first == text) return it->second;
    throw ScorerUnavailable("no fixed embedding registered for text '" + text + "'");
}

double StubPerceptualClient::distance(const Image& a, const Image& b) {
    require_same_shape(a, b, "perceptual distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------

namespace {
json image_json(const Image& image) {
    const auto vals = image.values();
    return json{{"shape", {image.channels(), image.height(), image.width()}},
                {"data", std::vector<double>(vals.begin(), vals.end())}};
}

Vector vector_from(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_array() || j[field].empty()) {
        throw ScorerUnavailable(std::string("scorer response lacks '") + field + "'");
    }
    const auto v = j[field].get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

HttpScorerClient::HttpScorerClient(std::string host, int port, int timeout_s)
    : host_(std::move(host)), port_(port), timeout_s_(timeout_s) {}

std::unique_ptr<HttpScorerClient> HttpScorerClient::from_url(const std::string& url) {
    std::string rest = url;
    if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
    if (!rest.empty() && rest.back() == '/') rest.pop_back();
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ParamError("scorer URL must be http://host:port, got '" + url + "'");
    int port = 0;
    try {
        port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
        throw ParamError("bad port in scorer URL '" + url + "'");
    }
    return std::make_unique<HttpScorerClient>(rest.substr(0, colon), port);
}

json HttpScorerClient::post(const std::string& route, const json& body) {
    httplib::Client cli(host_, port_);
    cli.set_connection_timeout(timeout_s_, 0);
    cli.set_read_timeout(timeout_s_, 0);
    auto res = cli.Post(route, body.dump(), "application/json");
    if (!res) throw ScorerUnavailable("scorer " + host_ + ":" + std::to_string(port_) + route + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw ScorerUnavailable("scorer " + route + " returned HTTP " + std::to_string(res->status));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw ScorerUnavailable("scorer " + route + " returned invalid JSON: " + e.what());
    }
}

Vector HttpScorerClient::embed_image(const Image& image) { return vector_from(post("/embed/image", image_json(image)), "embedding"); }

Vector HttpScorerClient::embed_text(const std::string& text) {
    return vector_from(post("/embed/text", json{{"text", text}}), "embedding");
}

double HttpScorerClient::distance(const Image& a, const Image& b) {
    const json r = post("/lpips", json{{"a", image_json(a)}, {"b", image_json(b)}});
    if (!r.contains("distance") || !r["distance"].is_number()) throw ScorerUnavailable("scorer response lacks 'distance'");
    return r["distance"].get<double>();
}

// ---------------------------------------------------------------------------

BackgroundMetrics background_metrics(const Image& a, const Image& b, PixelRange range, PerceptualClient* lpips) {
    require_same_shape(a, b, "background_metrics");
    BackgroundMetrics m;
    m.mse  = mse(a, b);
    m.psnr = psnr(a, b, range);
    m.ssim = ssim(a, b, range);
    if (lpips != nullptr) m.lpips = lpips->distance(a, b);
    return m;
}

ClipScores clip_scores(const Image& generated, const std::vector<Image>& concept_images,
                       const std::string& target_prompt, const BBox& fg_bbox, EmbeddingClient* client) {
    if (client == nullptr) throw ScorerUnavailable("no image-text embedding client configured");
    if (concept_images.empty()) throw ParamError("clip_scores needs at least one concept image");
    const FgBg parts = split_fg_bg(generated, fg_bbox);
    const Vector fg  = client->embed_image(parts.fg);
    double sum       = 0.0;
    for (const auto& img : concept_images) sum += cosine_score(fg, client->embed_image(img));
    ClipScores s;
    s.clip_i = sum / static_cast<double>(concept_images.size());
    s.clip_t = cosine_score(client->embed_image(generated), client->embed_text(target_prompt));
    return s;
}

// ---------------------------------------------------------------------------

namespace {

bool is_image_file(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ".png" || e == ".ppm" || e == ".pgm";
}

std::vector<fs::path> image_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, '\t')) out.push_back(cell);
    return out;
}

}  // namespace

BenchLayout BenchLayout::load(const fs::path& root) {
    if (!fs::is_directory(root)) throw LayoutError("benchmark root '" + root.string() + "' is not a directory");
    const fs::path prompts = root / "prompts.tsv";
    std::ifstream in(prompts);
    if (!in) throw LayoutError("missing " + prompts.string());

    BenchLayout layout;
    layout.root = root;
    std::map<std::string, std::vector<std::string>> swap_rows;
    std::map<std::string, std::vector<std::string>> concept_rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_tabs(line);
        const std::string where = prompts.string() + ":" + std::to_string(lineno);
        if (cells.size() != 4) throw LayoutError(where + ": expected 4 tab-separated fields");
        if (cells[0] == "swap") {
            if (!swap_rows.emplace(cells[1], cells).second) throw LayoutError(where + ": duplicate swap '" + cells[1] + "'");
        } else if (cells[0] == "concept") {
            if (!concept_rows.emplace(cells[1], cells).second) throw LayoutError(where + ": duplicate concept '" + cells[1] + "'");
        } else {
            throw LayoutError(where + ": unknown row kind '" + cells[0] + "'");
        }
    }

    const fs::path concepts_dir = root / "concepts";
    if (!fs::is_directory(concepts_dir)) throw LayoutError("missing " + concepts_dir.string());
    std::vector<fs::path> concept_dirs;
    for (const auto& e : fs::directory_iterator(concepts_dir))
        if (e.is_directory()) concept_dirs.push_back(e.path());
    std::sort(concept_dirs.begin(), concept_dirs.end());
    for (const auto& dir : concept_dirs) {
        const std::string name = dir.filename().string();
        auto row               = concept_rows.find(name);
        if (row == concept_rows.end()) throw LayoutError("concept '" + name + "' has no row in prompts.tsv");
        layout.concepts.push_back(ConceptEntry{name, row->second[2], row->second[3], image_files(dir)});
        concept_rows.erase(row);
    }
    if (!concept_rows.empty()) throw LayoutError("prompts.tsv names concept '" + concept_rows.begin()->first + "' with no directory");

    const fs::path swaps_dir = root / "swaps";
    if (!fs::is_directory(swaps_dir)) throw LayoutError("missing " + swaps_dir.string());
    for (const auto& img : image_files(swaps_dir)) {
        const std::string stem = img.stem().string();
        auto row               = swap_rows.find(stem);
        if (row == swap_rows.end()) throw LayoutError("swap image '" + stem + "' has no row in prompts.tsv");
        layout.swaps.push_back(SwapEntry{stem, img, root / "gt_bboxes" / (stem + ".json"), row->second[2], row->second[3]});
        swap_rows.erase(row);
    }
    if (!swap_rows.empty()) throw LayoutError("prompts.tsv names swap '" + swap_rows.begin()->first + "' with no image");

    layout.validate();
    return layout;
}

void BenchLayout::validate() const {
    if (concepts.empty()) throw LayoutError("layout has no concepts");
    if (swaps.empty()) throw LayoutError("layout has no swap images");
    for (const auto& c : concepts) {
        if (c.images.empty()) throw LayoutError("concept '" + c.name + "' has no images");
        if (split_words(c.token).empty()) throw LayoutError("concept '" + c.name + "' has an empty token");
    }
    for (const auto& s : swaps) {
        if (!fs::exists(s.gt_bbox)) throw LayoutError("missing ground-truth bbox for '" + s.stem + "': " + s.gt_bbox.string());
        if (split_words(s.source_concept).empty()) throw LayoutError("swap '" + s.stem + "' has an empty source concept");
    }
}

std::string target_prompt_for(const SwapEntry& swap, const ConceptEntry& concept_entry) {
    const auto words   = split_words(swap.source_prompt);
    const auto concept_words = split_words(swap.source_concept);
    std::vector<std::string> out;
    bool replaced = false;
    for (std::size_t i = 0; i < words.size();) {
        if (!replaced && i + concept_words.size() <= words.size() &&
            std::equal(concept_words.begin(), concept_words.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
            out.push_back(concept_entry.token);
            out.push_back(concept_entry.class_word);
            i += concept_words.size();
            replaced = true;
        } else {
            out.push_back(words[i++]);
        }
    }
    if (!replaced) throw PromptError("source concept '" + swap.source_concept + "' does not occur in '" + swap.source_prompt + "'");
    std::string s;
    for (const auto& w : out) {
        if (!s.empty()) s += ' ';
        s += w;
    }
    return s;
}

namespace {

BBox load_gt_bbox(const SwapEntry& s, const Image& source) {
    if (!fs::exists(s.gt_bbox)) throw LayoutError("missing ground-truth bbox for '" + s.stem + "'");
    std::ifstream in(s.gt_bbox);
    BBox b;
    try {
        b = json::parse(in).get<BBox>();
    } catch (const json::exception& e) {
        throw LayoutError("bad bbox file " + s.gt_bbox.string() + ": " + e.what());
    }
    const GridSize grid{source.height(), source.width()};
    return b.grid == grid ? b : resize_bbox(b, grid);
}

template <class F>
std::optional<double> mean_of(const std::vector<MetricsRow>& rows, F field) {
    if (rows.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto& r : rows) {
        const std::optional<double> v = field(r);
        if (!v) return std::nullopt;
        s += *v;
    }
    return s / static_cast<double>(rows.size());
}

}  // namespace

MetricsReport run_benchmark(const BenchLayout& layout, const MethodRunner& runner, const BenchOptions& options,
                            const std::optional<fs::path>& out_path) {
    layout.validate();
    struct Pair {
        const ConceptEntry* c;
        const SwapEntry* s;
    };
    std::vector<Pair> pairs;
    for (const auto& c : layout.concepts)
        for (const auto& s : layout.swaps) pairs.push_back({&c, &s});

    std::map<const ConceptEntry*, std::vector<Image>> concept_images;
    if (options.clip != nullptr) {
        for (const auto& c : layout.concepts)
            for (const auto& p : c.images) concept_images[&c].push_back(read_image(p));
    }

    std::vector<std::optional<MetricsRow>> rows(pairs.size());
    std::vector<std::string> errors(pairs.size());
    std::mutex scorer_mutex;  // clients are not assumed thread-safe
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < pairs.size(); i = next++) {
            const auto [c, s] = pairs[i];
            try {
                BenchCase bc;
                bc.concept_entry = c;
                bc.swap          = s;
                bc.source        = read_image(s->image);
                bc.gt_bbox       = load_gt_bbox(*s, bc.source);
                bc.target_prompt = target_prompt_for(*s, *c);
                bc.seed          = options.seed;

                const auto t0 = std::chrono::steady_clock::now();
                Image out     = runner(bc);
                const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                require_same_shape(out, bc.source, "runner output");

                MetricsRow row;
                row.concept_name = c->name;
                row.stem         = s->stem;
                row.time_s       = dt;
                const Image bg_src = zero_region(bc.source, bc.gt_bbox);
                const Image bg_out = zero_region(out, bc.gt_bbox);
                const auto bg = background_metrics(bg_src, bg_out, options.range);
                row.psnr      = bg.psnr;
                row.mse       = bg.mse;
                row.ssim      = bg.ssim;
                std::lock_guard lock(scorer_mutex);
                if (options.perceptual != nullptr) row.lpips = options.perceptual->distance(bg_src, bg_out);
                if (options.clip != nullptr) {
                    const auto cs = clip_scores(out, concept_images.at(c), bc.target_prompt, bc.gt_bbox, options.clip);
                    row.clip_i    = cs.clip_i;
                    row.clip_t    = cs.clip_t;
                }
                rows[i] = std::move(row);
            } catch (const Error& e) {
                errors[i] = c->name + "/" + s->stem + ": " + e.name() + ": " + e.what();
            } catch (const std::exception& e) {
                errors[i] = c->name + "/" + s->stem + ": " + e.what();
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(pairs.size())));
    if (jobs == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(work);
    }

    MetricsReport report;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (rows[i]) {
            report.per_image.push_back(std::move(*rows[i]));
        } else {
            spdlog::warn("benchmark pair failed: {}", errors[i]);
            report.failures.push_back(errors[i]);
        }
    }
    const auto& r = report.per_image;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.clip_i = mean_of(r, [](const MetricsRow& x) { return x.clip_i; });
    report.psnr   = mean_of(r, [](const MetricsRow& x) { return std::optional<double>(x.psnr); }).value_or(nan);
    report.lpips  = mean_of(r, [](const MetricsRow& x) { return x.lpips; });
    report.mse    = mean_of(r, [](const MetricsRow& x) { return std::optional<double>(x.mse); }).value_or(nan);
    report.ssim   = mean_of(r, [](const MetricsRow& x) { return std::optional<double>(x.ssim); }).value_or(nan);
    report.clip_t = mean_of(r, [](const MetricsRow& x) { return x.clip_t; });
    report.time_s = mean_of(r, [](const MetricsRow& x) { return std::optional<double>(x.time_s); }).value_or(nan);

    if (out_path) {
        fs::path json_path = *out_path;
        json_path.replace_extension(".json");
        fs::path txt_path = *out_path;
        txt_path.replace_extension(".txt");
        std::ofstream(json_path) << report_to_json(report).dump(2) << '\n';
        std::ofstream(txt_path) << format_report_table(report);
        if (!fs::exists(json_path) || !fs::exists(txt_path)) throw IoError("cannot write report to " + out_path->string());
    }
    return report;
}

namespace {

json number(double v) {
    if (std::isinf(v) && v > 0) return "inf";
    if (!std::isfinite(v)) return nullptr;
    return v;
}

json number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

}  // namespace

json report_to_json(const MetricsReport& report, bool include_time) {
    json j;
    j["columns"] = {"clip_i", "psnr", "lpips", "mse", "ssim", "clip_t", "time_s"};
    json mean    = {{"clip_i", number(report.clip_i)}, {"psnr", number(report.psnr)},   {"lpips", number(report.lpips)},
                    {"mse", number(report.mse)},       {"ssim", number(report.ssim)},   {"clip_t", number(report.clip_t)}};
    if (include_time) mean["time_s"] = number(report.time_s);
    j["mean"]  = mean;
    j["count"] = report.per_image.size();
    json rows  = json::array();
    for (const auto& r : report.per_image) {
        json row = {{"concept", r.concept_name}, {"image", r.stem},          {"clip_i", number(r.clip_i)},
                    {"psnr", number(r.psnr)},    {"lpips", number(r.lpips)}, {"mse", number(r.mse)},
                    {"ssim", number(r.ssim)},    {"clip_t", number(r.clip_t)}};
        if (include_time) row["time_s"] = number(r.time_s);
        rows.push_back(std::move(row));
    }
    j["per_image"] = std::move(rows);
    j["failures"]  = report.failures;
    return j;
}

namespace {

std::string cell(const std::optional<double>& v, double scale) {
    if (!v) return "n/a";
    if (std::isinf(*v)) return "inf";
    if (std::isnan(*v)) return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << *v * scale;
    return os.str();
}

}  // namespace

std::string format_report_table(const MetricsReport& report, const std::string& method) {
    const std::vector<std::string> header = {"Method", "CLIP-I", "PSNR", "LPIPSx10^3", "MSEx10^4", "SSIMx10^2", "CLIP-T", "Time(s)"};
    std::vector<std::vector<std::string>> body;
    auto line = [](const std::string& label, const std::optional<double>& clip_i, double p, const std::optional<double>& lp,
                   double m, double s, const std::optional<double>& clip_t, double t) {
        return std::vector<std::string>{label,         cell(clip_i, 1), cell(p, 1),      cell(lp, 1e3),
                                        cell(m, 1e4),  cell(s, 1e2),    cell(clip_t, 1), cell(t, 1)};
    };
    body.push_back(line(method, report.clip_i, report.psnr, report.lpips, report.mse, report.ssim, report.clip_t,
                        report.time_s));
    for (const auto& r : report.per_image) {
        body.push_back(line("  " + r.concept_name + "/" + r.stem, r.clip_i, r.psnr, r.lpips, r.mse, r.ssim, r.clip_t,
                            r.time_s));
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t k = 0; k < header.size(); ++k) {
        width[k] = header[k].size();
        for (const auto& row : body) width[k] = std::max(width[k], row[k].size());
    }
    std::ostringstream os;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k == 0) os << std::left << std::setw(static_cast<int>(width[k])) << row[k];
            else os << "  " << std::right << std::setw(static_cast<int>(width[k])) << row[k];
        }
        os << '\n';
    };
    emit(header);
    emit(body.front());
    if (body.size() > 1) {
        os << std::string(width[0], '-') << '\n';
        for (std::size_t i = 1; i < body.size(); ++i) emit(body[i]);
    }
    if (!report.failures.empty()) os << report.failures.size() << " pair(s) failed\n";
    return os.str();
}

}  // namespace ccswap
