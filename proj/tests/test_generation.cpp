#include "doctest.h"

#include <chrono>

#include "gendd/generation.hpp"
#include "gendd/synthetic.hpp"
#include "helpers.hpp"

using namespace gendd;

TEST_SUITE_BEGIN("generation");

TEST_CASE("prompt templates render by pure substitution") {
    PromptTemplate t{"a photo of a {label}"};
    CHECK(t.render("goldfish") == "a photo of a goldfish");
    CHECK(t.render("aquarium_fish") == "a photo of a aquarium fish");
    CHECK(PromptTemplate{"{label}"}.render("lawn_mower") == "lawn mower");

    CHECK_THROWS(PromptTemplate{"no placeholder"}.validate());
    CHECK_THROWS(PromptTemplate{"{label} and {label}"}.validate());
}

TEST_CASE("build_prompts keeps registry order") {
    LabelRegistry reg = numbered_registry(100);
    PromptTemplate tmpl{"{label}"};
    auto prompts = build_prompts(reg, tmpl);
    REQUIRE(prompts.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) CHECK(prompts[i] == tmpl.render(reg.name(i)));
    CHECK_THROWS(build_prompts(LabelRegistry{}, PromptTemplate{}));
}

TEST_CASE("conform_resolution bridges sizes") {
    ImageBatch b;
    b.data = Tensor({1, 1, 2, 2});
    b.data.data = {0.0, 1.0, 1.0, 0.0};
    CHECK(conform_resolution(b, 2).data.data == b.data.data);
    CHECK(conform_resolution(b, 1).data.data[0] == doctest::Approx(0.5));
    ImageBatch c;
    c.data = Tensor({2, 3, 5, 5}, 0.625);
    for (double v : conform_resolution(c, 3).data.data) CHECK(v == doctest::Approx(0.625));
    CHECK_THROWS(conform_resolution(b, 0));
}

TEST_CASE("generation config guards") {
    GenerationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.num_inference_steps = 0;
    CHECK_THROWS(cfg.validate());
    cfg = GenerationConfig{};
    cfg.guidance_scale = -1.0;
    CHECK_THROWS(cfg.validate());
}

namespace {
DatasetSpec spec_of(std::size_t classes, std::size_t res) {
    DatasetSpec s;
    s.name = "toy";
    s.registry = numbered_registry(classes);
    s.num_classes = classes;
    s.resolution = res;
    return s;
}

BudgetSpec budget_of(std::size_t classes, std::size_t ipc, double seconds = 600.0) {
    BudgetSpec b;
    b.wall_clock_seconds = seconds;
    b.ipc = ipc;
    b.num_classes = classes;
    return b;
}
} // namespace

TEST_CASE("distilled output is balanced, ordered and deterministic") {
    StubBackend backend;
    GenerationConfig cfg;
    cfg.native_resolution = 8;
    cfg.seed = 5;

    SUBCASE("100 classes at ipc 20") {
        auto run = distill_dataset(spec_of(100, 8), budget_of(100, 20), backend,
                                   PromptTemplate{}, cfg);
        CHECK(run.dataset.count() == 2000);
        CHECK(run.dataset.ipc == 20);
        std::vector<std::size_t> hist(100, 0);
        for (auto l : run.dataset.labels) hist[l]++;
        for (auto h : hist) CHECK(h == 20);
        for (auto p : run.dataset.provenance) CHECK(p == Provenance::Generated);
        CHECK(run.timing.within_budget);
        CHECK_FALSE(run.timing.aborted);
    }
    SUBCASE("200 classes at ipc 10 lands at the requested resolution") {
        auto run = distill_dataset(spec_of(200, 4), budget_of(200, 10), backend,
                                   PromptTemplate{}, cfg);
        CHECK(run.dataset.count() == 2000);
        CHECK(run.dataset.images.height() == 4);
        CHECK(run.dataset.images.width() == 4);
    }
    SUBCASE("ipc change does not reshuffle earlier images") {
        auto small = distill_dataset(spec_of(5, 8), budget_of(5, 2), backend,
                                     PromptTemplate{}, cfg);
        auto large = distill_dataset(spec_of(5, 8), budget_of(5, 4), backend,
                                     PromptTemplate{}, cfg);
        std::size_t per = 3 * 8 * 8;
        for (std::size_t c = 0; c < 5; ++c)
            for (std::size_t k = 0; k < 2; ++k)
                for (std::size_t e = 0; e < per; ++e)
                    CHECK(small.dataset.images.data.data[(c * 2 + k) * per + e] ==
                          large.dataset.images.data.data[(c * 4 + k) * per + e]);
    }
    SUBCASE("two identical runs produce element-equal tensors") {
        auto a = distill_dataset(spec_of(7, 8), budget_of(7, 3), backend, PromptTemplate{}, cfg);
        auto b = distill_dataset(spec_of(7, 8), budget_of(7, 3), backend, PromptTemplate{}, cfg);
        CHECK(a.dataset.images.data.data == b.dataset.images.data.data);
    }
    SUBCASE("mismatched class counts are rejected") {
        CHECK_THROWS(distill_dataset(spec_of(5, 8), budget_of(6, 2), backend, PromptTemplate{},
                                     cfg));
    }
}

namespace {
/// Backend whose per-image latency makes budget aborts deterministic in tests.
class SlowStub : public GeneratorBackend {
public:
    explicit SlowStub(double seconds_per_image) : delay_(seconds_per_image) {}
    ImageBatch generate(const std::vector<std::string>& prompts, const GenerationConfig& config,
                        Rng& rng) override {
        auto until = std::chrono::steady_clock::now() +
                     std::chrono::duration<double>(delay_ * prompts.size());
        while (std::chrono::steady_clock::now() < until) {}
        return inner_.generate(prompts, config, rng);
    }
    bool reentrant() const override { return true; }
    std::string name() const override { return "slow-stub"; }

private:
    StubBackend inner_;
    double delay_;
};
} // namespace

TEST_CASE("budget abort keeps completed rounds only") {
    SlowStub backend(0.02);
    GenerationConfig cfg;
    cfg.native_resolution = 4;
    // 4 classes, 0.02 s per image, budget fits roughly 2 full rounds of 4
    auto run = distill_dataset(spec_of(4, 4), budget_of(4, 50, 0.2), backend, PromptTemplate{},
                               cfg);
    CHECK(run.timing.aborted);
    CHECK_FALSE(run.timing.within_budget);
    CHECK(run.timing.abort_phase == "generation");
    CHECK(run.dataset.ipc >= 1);
    CHECK(run.dataset.ipc < 50);
    CHECK_NOTHROW(run.dataset.validate());
}

TEST_CASE("budget exhausted before one full round throws with timing") {
    SlowStub backend(0.1);
    GenerationConfig cfg;
    cfg.native_resolution = 4;
    CHECK_THROWS_AS(distill_dataset(spec_of(6, 4), budget_of(6, 3, 0.15), backend,
                                    PromptTemplate{}, cfg),
                    BudgetExceeded);
}

TEST_CASE("ipc zero produces an empty dataset without backend calls") {
    class CountingStub : public StubBackend {
    public:
        ImageBatch generate(const std::vector<std::string>& p, const GenerationConfig& c,
                            Rng& r) override {
            ++calls;
            return StubBackend::generate(p, c, r);
        }
        std::size_t calls = 0;
    } backend;
    GenerationConfig cfg;
    cfg.native_resolution = 4;
    BudgetSpec b = budget_of(3, 0);
    auto run = distill_dataset(spec_of(3, 4), b, backend, PromptTemplate{}, cfg);
    CHECK(run.dataset.count() == 0);
    CHECK(backend.calls == 0);
}

TEST_CASE("timing report carries budget accounting") {
    StubBackend backend;
    GenerationConfig cfg;
    cfg.native_resolution = 4;
    auto run = distill_dataset(spec_of(3, 4), budget_of(3, 2), backend, PromptTemplate{}, cfg);
    auto j = timing_report(run);
    CHECK(j["within_budget"] == true);
    CHECK(j["budget_s"] == doctest::Approx(600.0));
    CHECK(j["images_generated"] == 6);
    CHECK(j["images_per_second"].get<double>() > 0.0);
    CHECK(j["aborted"] == false);
}

namespace {
StudentCheckpoint toy_checkpoint(std::size_t num_classes) {
    StudentCheckpoint ck;
    ck.schedule = make_linear_beta_schedule();
    ck.t_student.taus = {250, 500, 750, 999};
    ck.num_classes = num_classes;
    ck.channels = 1;
    ck.student = std::make_unique<CondDenoiser>(1, num_classes, 8, 8, 123);
    return ck;
}
} // namespace

TEST_CASE("toy backend honors the sampling contracts") {
    PromptTemplate tmpl{"{label}"};
    LabelRegistry reg = numbered_registry(3);
    GenerationConfig cfg;
    cfg.native_resolution = 8;

    SUBCASE("one inference step means exactly one evaluation per image") {
        ToyStudentBackend backend(toy_checkpoint(3), reg, tmpl);
        Rng rng(1);
        backend.generate({"class 0", "class 1"}, cfg, rng);
        CHECK(backend.eval_calls() == 2);
    }
    SUBCASE("more steps mean more evaluations") {
        ToyStudentBackend backend(toy_checkpoint(3), reg, tmpl);
        GenerationConfig multi = cfg;
        multi.num_inference_steps = 3;
        Rng rng(1);
        backend.generate({"class 0"}, multi, rng);
        CHECK(backend.eval_calls() == 3);
    }
    SUBCASE("deterministic under a fixed stream") {
        ToyStudentBackend a(toy_checkpoint(3), reg, tmpl);
        ToyStudentBackend b(toy_checkpoint(3), reg, tmpl);
        Rng ra(9), rb(9);
        ImageBatch xa = a.generate({"class 2"}, cfg, ra);
        ImageBatch xb = b.generate({"class 2"}, cfg, rb);
        CHECK(xa.data.data == xb.data.data);
    }
    SUBCASE("guidance zero ignores the unconditional embedding entirely") {
        ToyStudentBackend backend(toy_checkpoint(3), reg, tmpl);
        Rng ra(9);
        ImageBatch before = backend.generate({"class 1"}, cfg, ra);
        // perturb the unconditional slot of the class table
        auto& table = backend.student().class_table();
        std::size_t emb_dim = table.value.shape[1];
        for (std::size_t e = 0; e < emb_dim; ++e) table.value.data[3 * emb_dim + e] += 10.0;
        Rng rb(9);
        ImageBatch after = backend.generate({"class 1"}, cfg, rb);
        CHECK(before.data.data == after.data.data);

        GenerationConfig guided = cfg;
        guided.guidance_scale = 1.5;
        Rng rc(9), rd(9);
        ImageBatch g1 = backend.generate({"class 1"}, guided, rc);
        for (std::size_t e = 0; e < emb_dim; ++e) table.value.data[3 * emb_dim + e] += 10.0;
        ImageBatch g2 = backend.generate({"class 1"}, guided, rd);
        CHECK(g1.data.data != g2.data.data); // guidance > 0 does mix it in
    }
    SUBCASE("unknown prompt is rejected") {
        ToyStudentBackend backend(toy_checkpoint(3), reg, tmpl);
        Rng rng(1);
        CHECK_THROWS(backend.generate({"not a class"}, cfg, rng));
    }
}

TEST_SUITE_END();
