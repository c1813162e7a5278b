#include "ccswap/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "ccswap/bboxgen.hpp"
#include "ccswap/error.hpp"
#include "ccswap/secr.hpp"

namespace ccswap {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double l2_norm(const Latent& v) {
    double s = 0.0;
    for (double x : v.values()) s += x * x;
    return std::sqrt(s);
}

void require_concept_token(const ConceptSpec& spec) {
    if (split_words(spec.token).empty()) throw ParamError("concept token must contain at least one word");
}

// What differs between swap, insertion and removal.
struct Plan {
    std::string source_prompt;
    std::string target_prompt;
    std::string source_secr_concept;  // empty: null embedding
    std::string target_secr_concept;
};

SwapResult run_swap(const Image& source_image, const SwapConfig& cfg, const Plan& plan, DenoiserBackend& backend,
                    bool require_override) {
    cfg.validate(backend);
    const auto start             = Clock::now();
    const std::uint64_t passes0  = backend.forward_count();

    const TextEmbedding src_emb = backend.embed_prompt(plan.source_prompt);
    const TextEmbedding tgt_emb = backend.embed_prompt(plan.target_prompt);
    const TextEmbedding uncond  = backend.embed_prompt("");

    SwapResult r;
    r.source_latent = backend.encode_image(source_image);

    if (cfg.bbox_override) {
        r.bbox_used = *cfg.bbox_override;
    } else if (require_override) {
        throw ParamError("insertion needs an explicit bbox (bbox_override)");
    } else {
        r.bbox_used = generate_bbox(backend, r.source_latent, plan.source_prompt, cfg.source_concept, cfg);
    }
    r.stage_bboxes = {r.bbox_used};

    SecrHandle source_hook;
    SecrHandle target_hook;
    if (cfg.secr_source) {
        source_hook = install_secr(backend, Branch::Source, concept_embedding(backend, plan.source_secr_concept),
                                   r.bbox_used, cfg.secr_layers);
    }
    if (cfg.secr_target) {
        target_hook = install_secr(backend, Branch::Target, concept_embedding(backend, plan.target_secr_concept),
                                   r.bbox_used, cfg.secr_layers);
    }

    const BranchInput source{r.source_latent, src_emb, uncond, cfg.guidance, Branch::Source};
    StepSampler sampler(derive_seed(cfg.seed, "steps"), cfg.t_min, cfg.t_max);

    const ssgu::Schedule schedule(cfg.total_steps, cfg.lambda);
    LoopResult loop = optimize_latent(
        r.source_latent, schedule, cfg.eta,
        [&](const Latent& current, int) {
            NoiseDraw d = sampler.next(current.shape());
            const BranchInput target{current, tgt_emb, uncond, cfg.guidance, Branch::Target};
            GradientField g = dds_gradient(target, source, d.t, d.eps, backend);
            return cfg.bgm ? bgm_apply(std::move(g), r.bbox_used) : g;
        },
        cfg.trace);

    r.final_latent   = std::move(loop.latent);
    r.anchor_steps   = loop.computed;
    r.trace          = std::move(loop.trace);
    r.image          = backend.decode_latent(r.final_latent);
    r.forward_passes = backend.forward_count() - passes0;
    r.wall_clock     = seconds_since(start);
    return r;
}

}  // namespace

StepSampler::StepSampler(std::uint64_t seed, int t_min, int t_max) : rng_(seed), t_min_(t_min), t_max_(t_max) {
    if (!(t_min < t_max)) throw ParamError("empty timestep range");
}

NoiseDraw StepSampler::next(const Shape3& shape) {
    NoiseDraw d;
    d.t   = rng_.uniform_int(t_min_, t_max_);
    d.eps = rng_.normal_like(shape);
    return d;
}

LoopResult optimize_latent(Latent init, const ssgu::Schedule& schedule, double eta, const AnchorGradient& gradient,
                           bool trace) {
    LoopResult out;
    out.latent = std::move(init);
    ssgu::GradientCache cache;
    for (int step = 0; step < schedule.total_steps(); ++step) {
        auto sg = ssgu::gradient_for_step(step, schedule, cache, [&] {
            GradientField g = gradient(out.latent, step);
            if (!g.all_finite()) throw NumericalError("non-finite gradient at step " + std::to_string(step));
            return g;
        });
        if (sg.computed) ++out.computed;
        if (trace) out.trace.push_back(StepRecord{step, sg.gradient.t, sg.computed, l2_norm(sg.gradient.values)});
        out.latent = ssgu::apply_update(out.latent, sg.gradient, eta);
    }
    return out;
}

SwapResult swap(const Image& source_image, const SwapConfig& cfg, const ConceptSpec& spec, DenoiserBackend& backend) {
    require_concept_token(spec);
    if (split_words(cfg.source_concept).empty()) throw PromptError("swap needs a source concept");
    backend.embed_prompt(cfg.source_prompt).indices_of(cfg.source_concept);
    return run_swap(source_image, cfg,
                    Plan{cfg.source_prompt, cfg.target_prompt, cfg.source_concept, cfg.target_concept}, backend,
                    false);
}

SwapResult insert(const Image& source_image, const SwapConfig& cfg, const ConceptSpec& spec,
                  DenoiserBackend& backend) {
    require_concept_token(spec);
    if (!cfg.bbox_override) throw ParamError("insertion needs an explicit bbox (bbox_override)");
    return run_swap(source_image, cfg, Plan{cfg.source_prompt, cfg.target_prompt, "", cfg.target_concept}, backend,
                    true);
}

SwapResult remove(const Image& source_image, const SwapConfig& cfg, DenoiserBackend& backend) {
    if (split_words(cfg.source_concept).empty()) throw PromptError("removal needs a source concept");
    backend.embed_prompt(cfg.source_prompt).indices_of(cfg.source_concept);
    SwapConfig c     = cfg;
    c.target_prompt  = "";
    c.target_concept = "";
    return run_swap(source_image, c, Plan{c.source_prompt, "", c.source_concept, ""}, backend, false);
}

SwapResult multi_swap(const Image& source_image, const std::vector<SwapConfig>& cfgs,
                      const std::vector<ConceptSpec>& concepts, DenoiserBackend& backend) {
    if (cfgs.size() != concepts.size()) throw ParamError("multi_swap needs one concept per stage config");
    const auto start = Clock::now();
    if (cfgs.empty()) {
        SwapResult r;
        r.source_latent = backend.encode_image(source_image);
        r.final_latent  = r.source_latent;
        r.image         = backend.decode_latent(r.final_latent);
        r.bbox_used     = BBox::full({r.source_latent.height(), r.source_latent.width()});
        r.wall_clock    = seconds_since(start);
        return r;
    }

    SwapResult total;
    Image current = source_image;
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        SwapResult stage;
        try {
            stage = swap(current, cfgs[i], concepts[i], backend);
        } catch (const Error& e) {
            throw StageError(i, e.name(), e.what());
        }
        if (i == 0) total.source_latent = stage.source_latent;
        total.stage_bboxes.push_back(stage.bbox_used);
        total.forward_passes += stage.forward_passes;
        total.anchor_steps += stage.anchor_steps;
        total.trace.insert(total.trace.end(), stage.trace.begin(), stage.trace.end());
        total.bbox_used    = stage.bbox_used;
        total.final_latent = std::move(stage.final_latent);
        current            = std::move(stage.image);
    }
    total.image      = std::move(current);
    total.wall_clock = seconds_since(start);
    return total;
}

SwapResult run_baseline(Baseline method, const Image& source_image, const SwapConfig& cfg, DenoiserBackend& backend) {
    cfg.validate(backend);
    const auto start            = Clock::now();
    const std::uint64_t passes0 = backend.forward_count();

    const TextEmbedding tgt_emb = backend.embed_prompt(cfg.target_prompt);
    const TextEmbedding uncond  = backend.embed_prompt("");
    SwapResult r;
    r.source_latent = backend.encode_image(source_image);
    r.bbox_used     = BBox::full({r.source_latent.height(), r.source_latent.width()});
    r.stage_bboxes  = {r.bbox_used};

    std::optional<BranchInput> source;
    if (method == Baseline::Dds) {
        source = BranchInput{r.source_latent, backend.embed_prompt(cfg.source_prompt), uncond, cfg.guidance,
                             Branch::None};
    }
    StepSampler sampler(derive_seed(cfg.seed, "steps"), cfg.t_min, cfg.t_max);
    LoopResult loop = optimize_latent(
        r.source_latent, ssgu::Schedule(cfg.total_steps, cfg.lambda), cfg.eta,
        [&](const Latent& current, int) {
            NoiseDraw d = sampler.next(current.shape());
            const BranchInput target{current, tgt_emb, uncond, cfg.guidance, Branch::None};
            if (method == Baseline::Sds) return sds_gradient(target, d.t, d.eps, backend);
            return dds_gradient(target, *source, d.t, d.eps, backend);
        },
        cfg.trace);

    r.final_latent   = std::move(loop.latent);
    r.anchor_steps   = loop.computed;
    r.trace          = std::move(loop.trace);
    r.image          = backend.decode_latent(r.final_latent);
    r.forward_passes = backend.forward_count() - passes0;
    r.wall_clock     = seconds_since(start);
    return r;
}

}  // namespace ccswap
