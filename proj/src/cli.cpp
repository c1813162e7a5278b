#include "ccswap/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "ccswap/bboxgen.hpp"
#include "ccswap/config.hpp"
#include "ccswap/error.hpp"
#include "ccswap/eval.hpp"
#include "ccswap/image_io.hpp"
#include "ccswap/pipeline.hpp"
#include "ccswap/rng.hpp"

namespace ccswap::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Published wall-clock seconds on a full diffusion backend at lambda = 1, 3, 5.
struct ReferenceRow {
    const char* method;
    double seconds[3];
};
constexpr ReferenceRow kReference[] = {{"sds", {40.37, 14.12, 8.62}}, {"dds", {66.89, 22.65, 13.90}}};

struct Options {
    std::string config_path;
    std::vector<std::string> sets;
    std::string image;
    std::string output;
    // bbox
    std::optional<double> alpha;
    std::optional<double> beta;
    // bench
    std::string root;
    std::optional<int> jobs;
    // accel-demo
    std::string method;
    std::string lambdas;
    std::optional<long> delay_us;
};

RunConfig build_config(const Options& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) apply_config_file(cfg, o.config_path);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!o.image.empty()) cfg.source_image = o.image;
    if (!o.output.empty()) cfg.output = o.output;
    if (o.alpha) cfg.swap.alpha = *o.alpha;
    if (o.beta) cfg.swap.beta = *o.beta;
    if (!o.root.empty()) cfg.bench_root = o.root;
    if (o.jobs) cfg.jobs = *o.jobs;
    if (!o.method.empty()) cfg.method = o.method;
    if (!o.lambdas.empty()) apply_setting(cfg, "lambdas", o.lambdas);
    if (o.delay_us) cfg.toy.forward_delay = std::chrono::microseconds(*o.delay_us);
    return cfg;
}

Image load_source(RunConfig& cfg) {
    if (cfg.source_image.empty()) throw ConfigError("no source image given (--image or source_image)");
    if (!fs::exists(cfg.source_image)) throw ConfigError("source image not found: '" + cfg.source_image + "'");
    Image img;
    try {
        img = read_image(cfg.source_image);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    fit_toy_to_image(cfg, img.shape());
    return img;
}

fs::path require_output(const RunConfig& cfg, const char* fallback) {
    return cfg.output.empty() ? fs::path(fallback) : fs::path(cfg.output);
}

fs::path sidecar_path(const fs::path& output) {
    fs::path p = output;
    p.replace_extension(".json");
    if (p == output) p += ".meta.json";
    return p;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

json trace_json(const std::vector<StepRecord>& trace) {
    json a = json::array();
    for (const auto& s : trace) a.push_back({{"step", s.step}, {"t", s.t}, {"computed", s.computed}, {"grad_norm", s.grad_norm}});
    return a;
}

enum class EditKind { Swap, Insert, Remove };

int cmd_edit(EditKind kind, const Options& o, std::ostream& out) {
    RunConfig cfg         = build_config(o);
    const Image source    = load_source(cfg);
    const fs::path output = require_output(cfg, "output.png");
    auto backend          = make_backend(cfg);
    const SwapConfig sc   = effective_swap_config(cfg, *backend);
    const ConceptSpec cs  = concept_spec(cfg);
    if (kind != EditKind::Remove && split_words(cs.token).empty()) {
        throw ConfigError("no concept token (set concept_token or target_concept)");
    }
    cfg.output = output.string();

    SwapResult r;
    switch (kind) {
        case EditKind::Swap: r = swap(source, sc, cs, *backend); break;
        case EditKind::Insert: r = insert(source, sc, cs, *backend); break;
        case EditKind::Remove: r = remove(source, sc, *backend); break;
    }

    write_image(output, r.image);
    json side = {{"command", kind == EditKind::Swap ? "swap" : kind == EditKind::Insert ? "insert" : "remove"},
                 {"config", config_to_json(cfg)},
                 {"backend", backend->info().kind},
                 {"bbox_used", r.bbox_used},
                 {"forward_passes", r.forward_passes},
                 {"anchor_steps", r.anchor_steps},
                 {"wall_clock", r.wall_clock}};
    if (sc.trace) side["trace"] = trace_json(r.trace);
    const fs::path meta = sidecar_path(output);
    write_json(meta, side);
    out << "wrote " << output.string() << " and " << meta.string() << "\n"
        << "bbox " << r.bbox_used.str() << ", " << r.forward_passes << " forward passes, " << std::fixed
        << std::setprecision(3) << r.wall_clock << " s\n";
    return kOk;
}

int cmd_bbox(const Options& o, std::ostream& out) {
    RunConfig cfg       = build_config(o);
    const Image source  = load_source(cfg);
    fs::path output     = require_output(cfg, "bbox.json");
    if (output.extension() != ".json") output.replace_extension(".json");
    auto backend        = make_backend(cfg);
    const SwapConfig sc = effective_swap_config(cfg, *backend);
    if (split_words(sc.source_concept).empty()) throw ConfigError("bbox needs source_concept");

    const Latent z         = backend->encode_image(source);
    const BBoxDetection d  = detect_bbox(*backend, z, sc.source_prompt, sc.source_concept, sc);
    fs::path heat          = output;
    heat.replace_filename(output.stem().string() + "_saliency.png");
    write_heatmap(heat, d.saliency.values);

    json j             = d.bbox;
    j["passes"]        = d.passes;
    j["saliency_image"] = heat.filename().string();
    j["config"]        = config_to_json(cfg);
    write_json(output, j);
    out << d.bbox.str() << "\n";
    return kOk;
}

std::unique_ptr<EmbeddingClient> make_clip_client(const std::string& scorer, PerceptualClient*& perceptual,
                                                  std::unique_ptr<PerceptualClient>& perceptual_owner) {
    perceptual = nullptr;
    if (scorer == "none") return nullptr;
    if (scorer == "stub") {
        perceptual_owner = std::make_unique<StubPerceptualClient>();
        perceptual       = perceptual_owner.get();
        return std::make_unique<StubEmbeddingClient>();
    }
    if (scorer.rfind("http://", 0) == 0) {
        auto client = HttpScorerClient::from_url(scorer);
        perceptual  = client.get();
        return client;
    }
    throw ConfigError("scorer must be none, stub or http://host:port, got '" + scorer + "'");
}

int cmd_bench(const Options& o, std::ostream& out) {
    const RunConfig cfg = build_config(o);
    if (cfg.bench_root.empty()) throw ConfigError("bench needs --root or bench_root");
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
    BenchLayout layout;
    try {
        layout = BenchLayout::load(cfg.bench_root);
    } catch (const LayoutError& e) {
        throw ConfigError(std::string("LayoutError: ") + e.what());
    }

    PerceptualClient* perceptual = nullptr;
    std::unique_ptr<PerceptualClient> perceptual_owner;
    auto clip = make_clip_client(cfg.scorer, perceptual, perceptual_owner);

    BenchOptions bo;
    bo.range      = parse_pixel_range(cfg.pixel_range);
    bo.jobs       = cfg.jobs;
    bo.seed       = cfg.swap.seed;
    bo.clip       = clip.get();
    bo.perceptual = perceptual;

    MethodRunner runner;
    if (cfg.runner == "identity") {
        runner = [](const BenchCase& c) { return c.source; };
    } else {
        runner = [&cfg](const BenchCase& c) {
            RunConfig rc                 = cfg;
            rc.swap.source_prompt        = c.swap->source_prompt;
            rc.swap.source_concept       = c.swap->source_concept;
            rc.swap.target_prompt        = c.target_prompt;
            rc.swap.target_concept       = c.concept_entry->token + " " + c.concept_entry->class_word;
            rc.concept_token             = c.concept_entry->token;
            rc.swap.seed                 = c.seed;
            fit_toy_to_image(rc, c.source.shape());
            auto backend        = make_backend(rc);  // one per case: backends are single-threaded
            const SwapConfig sc = effective_swap_config(rc, *backend);
            return swap(c.source, sc, concept_spec(rc), *backend).image;
        };
    }

    const fs::path base = require_output(cfg, "report");
    const MetricsReport report = run_benchmark(layout, runner, bo, base);
    out << format_report_table(report, cfg.runner);
    if (report.per_image.empty()) throw NumericalError("every benchmark pair failed");
    return kOk;
}

Image demo_image(const RunConfig& cfg) {
    Rng rng(derive_seed(cfg.swap.seed, "demo-image"));
    const Shape3 s = Shape3{cfg.toy.image_channels, cfg.toy.height * cfg.toy.downsample, cfg.toy.width * cfg.toy.downsample};
    Image img(s);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = u(rng.engine());
    return img;
}

int cmd_accel_demo(const Options& o, std::ostream& out) {
    RunConfig cfg = build_config(o);
    Baseline method;
    if (cfg.method == "sds") method = Baseline::Sds;
    else if (cfg.method == "dds") method = Baseline::Dds;
    else throw ConfigError("unknown method '" + cfg.method + "' (sds | dds)");
    if (cfg.lambdas.empty()) throw ConfigError("lambdas must list at least one value");
    if (cfg.swap.source_prompt.empty()) cfg.swap.source_prompt = "a photo of a cat";
    if (cfg.swap.target_prompt.empty()) cfg.swap.target_prompt = "a photo of a dog";

    const Image source = cfg.source_image.empty() ? demo_image(cfg) : load_source(cfg);

    struct Row {
        int lambda;
        std::uint64_t passes;
        double seconds;
    };
    std::vector<Row> rows;
    for (int lambda : cfg.lambdas) {
        RunConfig rc    = cfg;
        rc.swap.lambda  = lambda;
        auto backend    = make_backend(rc);
        SwapConfig sc   = effective_swap_config(rc, *backend);
        const auto r    = run_baseline(method, source, sc, *backend);
        rows.push_back({lambda, r.forward_passes, r.wall_clock});
    }

    out << "method " << cfg.method << ", T = " << cfg.swap.total_steps << ", guidance = " << cfg.swap.guidance
        << ", delay/pass = " << cfg.toy.forward_delay.count() << " us\n";
    out << std::left << std::setw(8) << "lambda" << std::right << std::setw(16) << "forward_passes" << std::setw(14)
        << "wall_clock_s" << std::setw(10) << "speedup" << std::setw(12) << "pass_ratio" << '\n';
    for (const auto& r : rows) {
        const double speed = r.seconds > 0 ? rows.front().seconds / r.seconds : 0.0;
        const double ratio = r.passes > 0 ? static_cast<double>(rows.front().passes) / static_cast<double>(r.passes) : 0.0;
        out << std::left << std::setw(8) << r.lambda << std::right << std::setw(16) << r.passes << std::setw(14)
            << std::fixed << std::setprecision(4) << r.seconds << std::setw(10) << std::setprecision(2) << speed
            << std::setw(12) << std::setprecision(3) << ratio << '\n';
    }
    for (const auto& ref : kReference) {
        if (cfg.method != ref.method) continue;
        out << "reference (full diffusion backend, not reproduced here): " << ref.method << " " << std::fixed
            << std::setprecision(2) << ref.seconds[0] << "s (w/o) / " << ref.seconds[1] << "s (lambda=3) / "
            << ref.seconds[2] << "s (lambda=5)\n";
    }

    if (!cfg.output.empty()) {
        json j = {{"method", cfg.method}, {"config", config_to_json(cfg)}, {"rows", json::array()}};
        for (const auto& r : rows) j["rows"].push_back({{"lambda", r.lambda}, {"forward_passes", r.passes}, {"wall_clock", r.seconds}});
        write_json(cfg.output, j);
    }
    return kOk;
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("-c,--config", o.config_path, "flat key = value config file, or a JSON sidecar");
    sub->add_option("-s,--set", o.sets, "key=value override (repeatable; wins over the config file)");
    sub->add_option("-i,--image", o.image, "source image (png, pgm, ppm)");
    sub->add_option("-o,--output", o.output, "output path");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Customized concept swapping on a pluggable denoiser backend", "ccswap"};
    app.require_subcommand(1);
    Options o;

    auto* swap_cmd   = app.add_subcommand("swap", "swap the source concept for a customized concept");
    auto* insert_cmd = app.add_subcommand("insert", "insert a customized concept into a given bbox");
    auto* remove_cmd = app.add_subcommand("remove", "remove the source concept");
    auto* bbox_cmd   = app.add_subcommand("bbox", "write the generated bbox and saliency image");
    auto* bench_cmd  = app.add_subcommand("bench", "run the benchmark harness over a layout directory");
    auto* accel_cmd  = app.add_subcommand("accel-demo", "step-skipping speedup on SDS/DDS baselines");
    for (auto* s : {swap_cmd, insert_cmd, remove_cmd, bbox_cmd, bench_cmd, accel_cmd}) add_common(s, o);
    bbox_cmd->add_option("--alpha", o.alpha, "self-attention refinement exponent");
    bbox_cmd->add_option("--beta", o.beta, "saliency threshold");
    bench_cmd->add_option("--root", o.root, "layout root directory");
    bench_cmd->add_option("--jobs", o.jobs, "parallel workers");
    accel_cmd->add_option("--method", o.method, "sds | dds");
    accel_cmd->add_option("--lambdas", o.lambdas, "comma-separated step-skipping periods");
    accel_cmd->add_option("--delay-us", o.delay_us, "injected delay per toy forward pass (microseconds)");

    std::vector<std::string> argv_store{"ccswap"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    const bool is_bbox = bbox_cmd->parsed();
    try {
        if (swap_cmd->parsed()) return cmd_edit(EditKind::Swap, o, out);
        if (insert_cmd->parsed()) return cmd_edit(EditKind::Insert, o, out);
        if (remove_cmd->parsed()) return cmd_edit(EditKind::Remove, o, out);
        if (is_bbox) return cmd_bbox(o, out);
        if (bench_cmd->parsed()) return cmd_bench(o, out);
        if (accel_cmd->parsed()) return cmd_accel_demo(o, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.name() << ": " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.name() << ": " << e.what() << '\n';
        const std::string n = e.name();
        if (is_bbox && (n == "EmptyMask" || n == "DegenerateAttention")) return kBBoxError;
        return kPipelineError;
    } catch (const std::exception& e) {
        err << "error: InternalError: " << e.what() << '\n';
        return kPipelineError;
    }
    return kConfigError;
}

}  // namespace ccswap::cli
