#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gendd/rng.hpp"
#include "gendd/trainer.hpp"
#include "gendd/types.hpp"

namespace gendd {

/// Text template with exactly one `{label}` placeholder. Underscores in the
/// label are rendered as spaces.
struct PromptTemplate {
    std::string text = "a photo of a {label}";

    void validate() const;
    std::string render(const std::string& label) const;
};

std::vector<std::string> build_prompts(const LabelRegistry& registry, const PromptTemplate& tmpl);

struct GenerationConfig {
    std::size_t num_inference_steps = 1;
    double guidance_scale = 0.0;
    std::uint64_t seed = 0;
    std::size_t native_resolution = 32;
    DtypeHint precision = DtypeHint::FullPrecision;

    void validate() const;
    nlohmann::json to_json() const;
};

/// One-step (or few-step) conditional sampler. generate() must be
/// deterministic given the rng stream and must honor num_inference_steps
/// and guidance_scale semantics: guidance 0 means a single conditional pass
/// with no unconditional mixing.
class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;

    /// One image per prompt, [N, C, res, res] in unit range at
    /// config.native_resolution.
    virtual ImageBatch generate(const std::vector<std::string>& prompts,
                                const GenerationConfig& config, Rng& rng) = 0;

    /// Whether concurrent generate() calls are safe.
    virtual bool reentrant() const = 0;
    virtual std::string name() const = 0;

    /// One-time setup (weight loading); timed separately by the pipeline.
    virtual void load(const GenerationConfig&) {}
};

/// Procedural per-class textures keyed by the prompt hash, with per-image
/// jitter from the rng stream. Fast and fully deterministic; used in tests.
class StubBackend : public GeneratorBackend {
public:
    explicit StubBackend(std::size_t channels = 3) : channels_(channels) {}

    ImageBatch generate(const std::vector<std::string>& prompts, const GenerationConfig& config,
                        Rng& rng) override;
    bool reentrant() const override { return true; }
    std::string name() const override { return "stub"; }

private:
    std::size_t channels_;
};

/// Samples from a trained one-step student checkpoint. Prompts are mapped
/// back to class indices through the registry and template.
class ToyStudentBackend : public GeneratorBackend {
public:
    ToyStudentBackend(StudentCheckpoint ckpt, const LabelRegistry& registry,
                      const PromptTemplate& tmpl);

    ImageBatch generate(const std::vector<std::string>& prompts, const GenerationConfig& config,
                        Rng& rng) override;
    bool reentrant() const override { return false; }
    std::string name() const override { return "toy"; }

    /// Number of denoiser evaluations performed so far (one-step contract).
    std::size_t eval_calls() const { return eval_calls_; }

    CondDenoiser& student() { return *ckpt_.student; }

private:
    std::size_t class_of(const std::string& prompt) const;

    StudentCheckpoint ckpt_;
    std::vector<std::string> prompt_of_class_;
    std::size_t eval_calls_ = 0;
};

/// Adapter for an external text-to-image process: writes a request JSON,
/// invokes the command with <request> <output dir>, and collects the PNGs
/// the command leaves behind (0.png, 1.png, ...).
class ExternalCommandBackend : public GeneratorBackend {
public:
    explicit ExternalCommandBackend(std::string command, std::filesystem::path work_dir);

    ImageBatch generate(const std::vector<std::string>& prompts, const GenerationConfig& config,
                        Rng& rng) override;
    bool reentrant() const override { return false; }
    std::string name() const override { return "external"; }

private:
    std::string command_;
    std::filesystem::path work_dir_;
    std::size_t call_index_ = 0;
};

/// Resolution bridging: no-op when sizes match, antialiased area resampling
/// when downscaling, bilinear when upscaling.
ImageBatch conform_resolution(const ImageBatch& batch, std::size_t target);

struct DistillTiming {
    double model_load_s = 0.0;
    double generation_s = 0.0;
    double saving_s = 0.0;
    double total_s = 0.0;
    double budget_s = 0.0;
    double images_per_second = 0.0;
    std::size_t images_generated = 0;
    bool within_budget = true;
    bool aborted = false;
    std::string abort_phase;
};

struct DistillRun {
    DistilledDataset dataset;
    DistillTiming timing;
    GenerationConfig config;
    PromptTemplate prompt_template;
};

/// Thrown when the wall clock runs out before one full class round finishes.
class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(const std::string& what, DistillTiming t)
        : std::runtime_error(what), timing(std::move(t)) {}
    DistillTiming timing;
};

/// Labels -> prompts -> per-class sampling under the wall-clock budget.
/// Classes are visited round-robin so an abort still yields a balanced
/// dataset (completed rounds only). Per-image rng streams derive from
/// (config.seed, class, index), so ipc changes never reshuffle earlier
/// images. `output_resolution` overrides spec.resolution when the caller
/// wants to keep crop slack for a following augmentation pass (0 = use
/// spec.resolution). Output pixels are snapped to the 16-bit storage grid.
DistillRun distill_dataset(const DatasetSpec& spec, const BudgetSpec& budget,
                           GeneratorBackend& backend, const PromptTemplate& tmpl,
                           const GenerationConfig& config, std::size_t output_resolution = 0);

nlohmann::json timing_report(const DistillRun& run);
nlohmann::json timing_to_json(const DistillTiming& t);

} // namespace gendd
