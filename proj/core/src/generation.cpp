#include "gendd/generation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>

#include "gendd/png_io.hpp"
#include "gendd/resample.hpp"
#include "gendd/synthetic.hpp"

namespace gendd {

namespace {
constexpr const char* kPlaceholder = "{label}";

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
} // namespace

void PromptTemplate::validate() const {
    auto first = text.find(kPlaceholder);
    if (first == std::string::npos)
        throw std::invalid_argument("PromptTemplate: missing {label} placeholder");
    if (text.find(kPlaceholder, first + 1) != std::string::npos)
        throw std::invalid_argument("PromptTemplate: more than one {label} placeholder");
}

std::string PromptTemplate::render(const std::string& label) const {
    validate();
    std::string readable = label;
    std::replace(readable.begin(), readable.end(), '_', ' ');
    std::string out = text;
    out.replace(out.find(kPlaceholder), std::string(kPlaceholder).size(), readable);
    return out;
}

std::vector<std::string> build_prompts(const LabelRegistry& registry, const PromptTemplate& tmpl) {
    if (registry.count() == 0) throw std::invalid_argument("build_prompts: empty registry");
    tmpl.validate();
    std::vector<std::string> prompts;
    prompts.reserve(registry.count());
    for (const auto& name : registry.names()) prompts.push_back(tmpl.render(name));
    return prompts;
}

void GenerationConfig::validate() const {
    if (num_inference_steps < 1)
        throw std::invalid_argument("GenerationConfig: num_inference_steps must be >= 1");
    if (guidance_scale < 0)
        throw std::invalid_argument("GenerationConfig: guidance_scale must be >= 0");
    if (native_resolution == 0)
        throw std::invalid_argument("GenerationConfig: native_resolution must be positive");
}

nlohmann::json GenerationConfig::to_json() const {
    return {{"num_inference_steps", num_inference_steps},
            {"guidance_scale", guidance_scale},
            {"seed", seed},
            {"native_resolution", native_resolution},
            {"precision", precision == DtypeHint::FullPrecision ? "full" : "half"}};
}

ImageBatch StubBackend::generate(const std::vector<std::string>& prompts,
                                 const GenerationConfig& config, Rng& rng) {
    config.validate();
    std::size_t res = config.native_resolution;
    ImageBatch out;
    out.data = Tensor({prompts.size(), channels_, res, res});
    std::size_t per = channels_ * res * res;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        Tensor img = procedural_texture(string_hash(prompts[i]), channels_, res, rng);
        std::copy(img.data.begin(), img.data.end(), &out.data.data[i * per]);
    }
    return out;
}

ToyStudentBackend::ToyStudentBackend(StudentCheckpoint ckpt, const LabelRegistry& registry,
                                     const PromptTemplate& tmpl)
    : ckpt_(std::move(ckpt)) {
    if (registry.count() != ckpt_.num_classes)
        throw std::invalid_argument("ToyStudentBackend: registry size disagrees with checkpoint");
    for (const auto& name : registry.names()) prompt_of_class_.push_back(tmpl.render(name));
}

std::size_t ToyStudentBackend::class_of(const std::string& prompt) const {
    for (std::size_t c = 0; c < prompt_of_class_.size(); ++c)
        if (prompt_of_class_[c] == prompt) return c;
    throw std::invalid_argument("ToyStudentBackend: prompt does not name a known class: '" +
                                prompt + "'");
}

ImageBatch ToyStudentBackend::generate(const std::vector<std::string>& prompts,
                                       const GenerationConfig& config, Rng& rng) {
    config.validate();
    std::size_t res = config.native_resolution;
    std::size_t ch = ckpt_.channels;
    CondDenoiser& net = *ckpt_.student;

    // Highest student timesteps first: one step samples at the noisiest tau,
    // extra steps walk down the tau set with fresh re-noising in between.
    std::vector<std::size_t> taus = ckpt_.t_student.taus;
    std::sort(taus.rbegin(), taus.rend());
    std::size_t steps = std::min(config.num_inference_steps, taus.size());
    taus.resize(steps);

    ImageBatch out;
    out.data = Tensor({prompts.size(), ch, res, res});
    std::size_t per = ch * res * res;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        std::size_t cls = class_of(prompts[i]);
        Tensor x({1, ch, res, res});
        for (double& v : x.data) v = rng.normal();
        Tensor y;
        for (std::size_t s = 0; s < steps; ++s) {
            std::size_t t = taus[s];
            y = net.forward(x, t, {cls});
            ++eval_calls_;
            if (config.guidance_scale > 0.0) {
                Tensor yu = net.forward(x, t, {net.unconditional_id()});
                ++eval_calls_;
                for (std::size_t e = 0; e < y.size(); ++e)
                    y[e] = yu[e] + config.guidance_scale * (y[e] - yu[e]);
            }
            if (s + 1 < steps) {
                std::size_t tn = taus[s + 1];
                double a = ckpt_.schedule.alpha(tn), sg = ckpt_.schedule.sigma(tn);
                for (std::size_t e = 0; e < x.size(); ++e) x[e] = a * y[e] + sg * rng.normal();
            }
        }
        for (std::size_t e = 0; e < per; ++e)
            out.data.data[i * per + e] = std::clamp(0.5 * (y[e] + 1.0), 0.0, 1.0);
    }
    return out;
}

ExternalCommandBackend::ExternalCommandBackend(std::string command, std::filesystem::path work_dir)
    : command_(std::move(command)), work_dir_(std::move(work_dir)) {
    if (command_.empty()) throw std::invalid_argument("ExternalCommandBackend: empty command");
}

ImageBatch ExternalCommandBackend::generate(const std::vector<std::string>& prompts,
                                            const GenerationConfig& config, Rng& rng) {
    config.validate();
    namespace fs = std::filesystem;
    fs::path call_dir = work_dir_ / ("call_" + std::to_string(call_index_++));
    fs::create_directories(call_dir);

    nlohmann::json req = {{"prompts", prompts}, {"config", config.to_json()}};
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < prompts.size(); ++i) seeds.push_back(rng.next_u64());
    req["seeds"] = seeds;
    fs::path req_path = call_dir / "request.json";
    std::ofstream(req_path) << req.dump(2) << "\n";

    std::string cmd = command_ + " " + req_path.string() + " " + call_dir.string();
    int rc = std::system(cmd.c_str());
    if (rc != 0)
        throw std::runtime_error("external backend command failed with status " +
                                 std::to_string(rc));

    std::size_t res = config.native_resolution;
    ImageBatch out;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        fs::path img_path = call_dir / (std::to_string(i) + ".png");
        if (!fs::exists(img_path))
            throw std::runtime_error("external backend produced no image: " + img_path.string());
        PngImage png = read_png(img_path.string());
        if (i == 0) out.data = Tensor({prompts.size(), png.channels, res, res});
        if (png.channels != out.data.shape[1])
            throw std::runtime_error("external backend: inconsistent channel count");
        // interleaved -> planar, then conform to the declared native size
        Tensor planar({1, png.channels, png.height, png.width});
        for (std::size_t y = 0; y < png.height; ++y)
            for (std::size_t x = 0; x < png.width; ++x)
                for (std::size_t c = 0; c < png.channels; ++c)
                    planar.at4(0, c, y, x) = png.pixels[(y * png.width + x) * png.channels + c];
        ImageBatch one;
        one.data = std::move(planar);
        one = resample_square(one, res);
        std::copy(one.data.data.begin(), one.data.data.end(),
                  &out.data.data[i * png.channels * res * res]);
    }
    return out;
}

ImageBatch conform_resolution(const ImageBatch& batch, std::size_t target) {
    if (target == 0) throw std::invalid_argument("conform_resolution: target must be positive");
    return resample_square(batch, target);
}

DistillRun distill_dataset(const DatasetSpec& spec, const BudgetSpec& budget,
                           GeneratorBackend& backend, const PromptTemplate& tmpl,
                           const GenerationConfig& config, std::size_t output_resolution) {
    spec.validate();
    budget.validate();
    config.validate();
    tmpl.validate();
    if (budget.num_classes != spec.num_classes)
        throw std::invalid_argument("distill_dataset: budget and spec class counts disagree");

    auto t0 = std::chrono::steady_clock::now();
    DistillTiming timing;
    timing.budget_s = budget.wall_clock_seconds;

    backend.load(config);
    timing.model_load_s = seconds_since(t0);

    std::vector<std::string> prompts = build_prompts(spec.registry, tmpl);
    std::size_t classes = spec.num_classes;
    std::size_t ipc = budget.ipc;
    std::size_t res = output_resolution ? output_resolution : spec.resolution;

    // round-major generation, class-major assembly: slot (class, round)
    std::vector<Tensor> slots(classes * ipc);
    std::size_t channels = 3;
    auto gen_start = std::chrono::steady_clock::now();
    std::size_t completed_rounds = 0;
    bool aborted = false;
    for (std::size_t r = 0; r < ipc && !aborted; ++r) {
        for (std::size_t c = 0; c < classes; ++c) {
            Rng rng = Rng::derive(config.seed, {c, r});
            ImageBatch one = backend.generate({prompts[c]}, config, rng);
            if (one.count() != 1)
                throw std::runtime_error("distill_dataset: backend returned wrong image count");
            one = conform_resolution(one, res);
            channels = one.channels();
            slots[c * ipc + r] = std::move(one.data);
            ++timing.images_generated;
            if (seconds_since(t0) > budget.wall_clock_seconds) {
                aborted = true;
                break;
            }
        }
        if (!aborted) completed_rounds = r + 1;
    }
    if (!aborted) completed_rounds = ipc;
    timing.generation_s = seconds_since(gen_start);
    timing.total_s = seconds_since(t0);
    timing.aborted = aborted;
    timing.within_budget = !aborted && timing.total_s <= budget.wall_clock_seconds;
    if (aborted) timing.abort_phase = "generation";
    if (timing.generation_s > 0)
        timing.images_per_second = static_cast<double>(timing.images_generated) / timing.generation_s;

    if (aborted && completed_rounds == 0)
        throw BudgetExceeded("distill_dataset: wall clock exhausted before one full class round",
                             timing);

    DistillRun run;
    run.config = config;
    run.prompt_template = tmpl;
    run.timing = timing;
    DistilledDataset& ds = run.dataset;
    ds.registry = spec.registry;
    ds.ipc = completed_rounds;
    ds.images.data = Tensor({classes * completed_rounds, channels, res, res});
    std::size_t per = channels * res * res;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t r = 0; r < completed_rounds; ++r) {
            const Tensor& img = slots[c * ipc + r];
            std::copy(img.data.begin(), img.data.end(),
                      &ds.images.data.data[(c * completed_rounds + r) * per]);
            ds.labels.push_back(c);
            ds.provenance.push_back(Provenance::Generated);
        }
    }
    quantize_unit16(ds.images);
    ds.validate();
    return run;
}

nlohmann::json timing_to_json(const DistillTiming& t) {
    return {{"phases",
             {{"model_load_s", t.model_load_s},
              {"generation_s", t.generation_s},
              {"saving_s", t.saving_s}}},
            {"total_s", t.total_s},
            {"budget_s", t.budget_s},
            {"within_budget", t.within_budget},
            {"images_generated", t.images_generated},
            {"images_per_second", t.images_per_second},
            {"aborted", t.aborted},
            {"abort_phase", t.abort_phase}};
}

nlohmann::json timing_report(const DistillRun& run) {
    nlohmann::json j = timing_to_json(run.timing);
    j["config"] = run.config.to_json();
    j["prompt_template"] = run.prompt_template.text;
    j["ipc"] = run.dataset.ipc;
    j["classes"] = run.dataset.registry.count();
    return j;
}

} // namespace gendd
