// Acceptance gate: one criterion per function, one PASS/FAIL line each.
// Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "gendd/augment.hpp"
#include "gendd/dataset_io.hpp"
#include "gendd/evaluator.hpp"
#include "gendd/generation.hpp"
#include "gendd/losses.hpp"
#include "gendd/synthetic.hpp"
#include "gendd/trainer.hpp"

using namespace gendd;

namespace {

constexpr double kGradRelTol = 1e-4;   // A1: analytic vs central differences
constexpr double kFdEps = 1e-6;        // A1: finite-difference step
constexpr double kA4LossDrop = 0.5;    // A4: required moving-average reduction
constexpr double kA5MinAccuracy = 0.95; // A5: separable-set test accuracy
constexpr double kA8Tolerance = 0.01;  // A8: |accuracy - 0.0137| bound

struct Outcome {
    bool pass = false;
    bool skipped = false;
    std::string detail;
};

double rel_err(double got, double want) {
    double scale = std::max({std::abs(got), std::abs(want), 1e-8});
    return std::abs(got - want) / scale;
}

// ---------------------------------------------------------------------------

Outcome criterion_a1() {
    Outcome o;
    Rng rng(101);
    double worst = 0.0;

    // generator adversarial loss: gradient w.r.t. head outputs
    HeadOutputs fake;
    fake.values = Tensor({4, 3});
    for (double& v : fake.values.data) v = rng.uniform(-2.0, 2.0);
    Tensor g = generator_adversarial_grad(fake);
    for (std::size_t i = 0; i < fake.values.size(); ++i) {
        HeadOutputs p = fake, m = fake;
        p.values.data[i] += kFdEps;
        m.values.data[i] -= kFdEps;
        double fd = (generator_adversarial_loss(p) - generator_adversarial_loss(m)) / (2 * kFdEps);
        worst = std::max(worst, rel_err(g[i], fd));
    }

    // hinge loss: gradients w.r.t. real and fake head outputs, off the kink
    HeadOutputs real = fake;
    for (double& v : real.values.data) {
        v = rng.uniform(-2.0, 2.0);
        while (std::abs(std::abs(v) - 1.0) < 1e-3) v = rng.uniform(-2.0, 2.0);
    }
    HeadOutputs fake2 = fake;
    for (double& v : fake2.values.data) {
        v = rng.uniform(-2.0, 2.0);
        while (std::abs(std::abs(v) - 1.0) < 1e-3) v = rng.uniform(-2.0, 2.0);
    }
    Tensor gr = hinge_grad_real(real), gf = hinge_grad_fake(fake2);
    for (std::size_t i = 0; i < real.values.size(); ++i) {
        HeadOutputs p = real, m = real;
        p.values.data[i] += kFdEps;
        m.values.data[i] -= kFdEps;
        double fd = (discriminator_hinge_loss(p, fake2, 0, 0) -
                     discriminator_hinge_loss(m, fake2, 0, 0)) /
                    (2 * kFdEps);
        worst = std::max(worst, rel_err(gr[i], fd));
        HeadOutputs pf = fake2, mf = fake2;
        pf.values.data[i] += kFdEps;
        mf.values.data[i] -= kFdEps;
        fd = (discriminator_hinge_loss(real, pf, 0, 0) -
              discriminator_hinge_loss(real, mf, 0, 0)) /
             (2 * kFdEps);
        worst = std::max(worst, rel_err(gf[i], fd));
    }

    // R1 path: gradient of gamma*R1 w.r.t. the discriminator head weights,
    // through the frozen extractor, vs finite differences
    FeatureEncoder encoder(3, 4, 77);
    DiscriminatorStack disc(&encoder, 3, 8, 78);
    ImageBatch x0;
    x0.range = ValueRange::Symmetric;
    x0.data = Tensor({4, 3, 8, 8});
    for (double& v : x0.data.data) v = rng.uniform(-1.0, 1.0);
    const double gamma = 0.37;
    auto r1_of = [&] {
        auto acts = encoder.forward_taps(x0.data);
        return gamma * r1_from_input_gradient(disc.summed_head_input_gradient(acts));
    };
    auto acts = encoder.forward_taps(x0.data);
    Tensor gsum = disc.summed_head_input_gradient(acts);
    for (auto* p : disc.parameters()) p->zero_grad();
    disc.accumulate_r1_grad(acts, gsum, gamma);
    for (auto* p : disc.parameters()) {
        for (std::size_t i = 0; i < p->value.size(); i += std::max<std::size_t>(1, p->value.size() / 16)) {
            double keep = p->value[i];
            p->value[i] = keep + kFdEps;
            double up = r1_of();
            p->value[i] = keep - kFdEps;
            double dn = r1_of();
            p->value[i] = keep;
            double fd = (up - dn) / (2 * kFdEps);
            if (std::abs(fd) < 1e-12 && std::abs(p->grad[i]) < 1e-12) continue;
            worst = std::max(worst, rel_err(p->grad[i], fd));
        }
    }

    // distillation loss: output gradient and the full theta chain
    NoiseSchedule sched = make_linear_beta_schedule();
    for (WeightingKind kind : {WeightingKind::Exponential, WeightingKind::Sds}) {
        WeightingScheme scheme{kind};
        ImageBatch st, te;
        st.range = te.range = ValueRange::Symmetric;
        st.data = Tensor({4, 3, 8, 8});
        te.data = Tensor({4, 3, 8, 8});
        for (double& v : st.data.data) v = rng.uniform(-1.0, 1.0);
        for (double& v : te.data.data) v = rng.uniform(-1.0, 1.0);
        Tensor gd = distillation_grad(st, te, 444, scheme, sched);
        for (std::size_t i = 0; i < st.data.size(); i += 37) {
            ImageBatch p = st, m = st;
            p.data[i] += kFdEps;
            m.data[i] -= kFdEps;
            double fd = (distillation_loss(p, te, 444, scheme, sched) -
                         distillation_loss(m, te, 444, scheme, sched)) /
                        (2 * kFdEps);
            worst = std::max(worst, rel_err(gd[i], fd));
        }
    }

    // theta-gradient of the distillation term through the student backward;
    // without stop-gradient the finite differences also travel the teacher
    // chain, so the full backward path is exercised
    CondDenoiser student(1, 2, 6, 6, 301), teacher(1, 2, 6, 6, 302);
    Tensor x_s({2, 1, 8, 8}), eps_prime({2, 1, 8, 8});
    for (double& v : x_s.data) v = rng.normal();
    for (double& v : eps_prime.data) v = rng.normal();
    std::vector<std::size_t> labels{0, 1};
    WeightingScheme scheme{};
    auto flat_grad = distillation_theta_grad(student, teacher, sched, scheme, x_s, 500, labels,
                                             300, eps_prime, false);
    auto loss_at = [&] {
        Tensor xhat = student.forward(x_s, 500, labels);
        ImageBatch xb;
        xb.range = ValueRange::Symmetric;
        xb.data = xhat;
        ImageBatch xt = add_noise(xb, 300, eps_prime, sched);
        Tensor tout = teacher.forward(xt.data, 300, labels);
        ImageBatch tb;
        tb.range = ValueRange::Symmetric;
        tb.data = tout;
        return distillation_loss(xb, tb, 300, scheme, sched);
    };
    auto params = student.parameters();
    std::size_t offset = 0;
    Rng pick(999);
    for (auto* p : params) {
        for (int probe = 0; probe < 4; ++probe) {
            std::size_t i = pick.uniform_int(p->value.size());
            double keep = p->value[i];
            p->value[i] = keep + kFdEps;
            double up = loss_at();
            p->value[i] = keep - kFdEps;
            double dn = loss_at();
            p->value[i] = keep;
            double fd = (up - dn) / (2 * kFdEps);
            if (std::abs(fd) < 1e-10 && std::abs(flat_grad[offset + i]) < 1e-10) continue;
            worst = std::max(worst, rel_err(flat_grad[offset + i], fd));
        }
        offset += p->value.size();
    }

    // exact zero cases
    HeadOutputs sat_real, sat_fake;
    sat_real.values = Tensor({2, 2}, 1.5);
    sat_fake.values = Tensor({2, 2}, -1.5);
    bool hinge_zero = discriminator_hinge_loss(sat_real, sat_fake, 0.0, 0.0) == 0.0;
    ImageBatch same;
    same.range = ValueRange::Symmetric;
    same.data = Tensor({2, 1, 4, 4}, 0.25);
    bool distill_zero = distillation_loss(same, same, 123, scheme, sched) == 0.0;

    o.pass = worst < kGradRelTol && hinge_zero && distill_zero;
    std::ostringstream ss;
    ss << "max relative gradient error " << worst << " (tol " << kGradRelTol
       << "), hinge saturation zero " << (hinge_zero ? "exact" : "VIOLATED")
       << ", identity distillation zero " << (distill_zero ? "exact" : "VIOLATED");
    o.detail = ss.str();
    return o;
}

Outcome criterion_a2() {
    Outcome o;
    NoiseSchedule sched = make_linear_beta_schedule();
    CondDenoiser student(1, 2, 8, 8, 11), teacher(1, 2, 8, 8, 12);
    Rng rng(13);
    Tensor x_s({3, 1, 8, 8}), eps_prime({3, 1, 8, 8});
    for (double& v : x_s.data) v = rng.normal();
    for (double& v : eps_prime.data) v = rng.normal();
    std::vector<std::size_t> labels{0, 1, 0};
    WeightingScheme scheme{};

    auto with_sg = distillation_theta_grad(student, teacher, sched, scheme, x_s, 750, labels, 400,
                                           eps_prime, true);
    auto without_sg = distillation_theta_grad(student, teacher, sched, scheme, x_s, 750, labels,
                                              400, eps_prime, false);

    // independent oracle for the stopped gradient: freeze the teacher output
    // at the baseline prediction, then backprop only the direct term
    Tensor xhat = student.forward(x_s, 750, labels);
    ImageBatch xb;
    xb.range = ValueRange::Symmetric;
    xb.data = xhat;
    ImageBatch xt = add_noise(xb, 400, eps_prime, sched);
    ImageBatch tb;
    tb.range = ValueRange::Symmetric;
    tb.data = teacher.forward(xt.data, 400, labels);
    Tensor dxhat = distillation_grad(xb, tb, 400, scheme, sched);
    for (auto* p : student.parameters()) p->zero_grad();
    student.backward(dxhat);
    std::vector<double> direct;
    for (auto* p : student.parameters())
        direct.insert(direct.end(), p->grad.data.begin(), p->grad.data.end());

    bool exact_zero = with_sg == direct; // teacher branch exactly absent
    double branch = 0.0;
    for (std::size_t i = 0; i < with_sg.size(); ++i) {
        double d = without_sg[i] - with_sg[i];
        branch += d * d;
    }
    o.pass = exact_zero && branch > 0.0;
    std::ostringstream ss;
    ss << "stopped gradient bitwise equals the frozen-teacher oracle: "
       << (exact_zero ? "yes" : "NO") << "; teacher-branch squared norm without stop-gradient "
       << branch << " (> 0 required)";
    o.detail = ss.str();
    return o;
}

Outcome criterion_a3() {
    Outcome o;
    StubBackend backend;
    PromptTemplate tmpl;
    bool ok = true;
    std::ostringstream ss;

    for (auto [classes, ipc] : {std::pair<std::size_t, std::size_t>{200, 10}, {200, 20}}) {
        DatasetSpec spec;
        spec.name = "stub";
        spec.registry = numbered_registry(classes);
        spec.num_classes = classes;
        spec.resolution = 16;
        BudgetSpec budget;
        budget.ipc = ipc;
        budget.num_classes = classes;
        GenerationConfig cfg;
        cfg.seed = 2024;
        cfg.native_resolution = crop_source_size(16);

        auto run = distill_dataset(spec, budget, backend, tmpl, cfg, crop_source_size(16));
        AugmentationSpec aug;
        aug.crop_size = 16;
        aug.seed = 7;
        auto expanded = expand_dataset(run.dataset, aug, ExpansionPlan{5});
        auto expanded2 = expand_dataset(run.dataset, aug, ExpansionPlan{5});

        bool balanced = true;
        std::vector<std::size_t> hist(classes, 0);
        for (auto l : expanded.labels) hist[l]++;
        for (auto h : hist) balanced = balanced && h == ipc * 5;
        bool in_range = true;
        for (double v : expanded.images.data.data) in_range = in_range && v >= 0.0 && v <= 1.0;
        bool shapes = expanded.images.height() == 16 && expanded.images.width() == 16;
        bool identical = expanded.images.data.data == expanded2.images.data.data;
        bool mapped = expanded.ipc == ipc * 5;

        ok = ok && balanced && in_range && shapes && identical && mapped;
        ss << "ipc " << ipc << "->" << expanded.ipc << " (balanced " << (balanced ? "yes" : "NO")
           << ", in-range " << (in_range ? "yes" : "NO") << ", bit-identical reruns "
           << (identical ? "yes" : "NO") << "); ";
    }
    o.pass = ok;
    o.detail = ss.str();
    return o;
}

Outcome criterion_a4() {
    Outcome o;
    LabeledStore data = two_class_toy(8, 64, 2024);
    AddTrainConfig cfg;
    cfg.steps = 500;
    cfg.batch_size = 16;
    cfg.seed = 5;
    AddTrainer trainer(data.images, data.labels, 2, cfg);
    std::uint64_t teacher0 = trainer.teacher_checksum();

    // the student warm-starts at the teacher, where the distillation loss is
    // already at its floor; perturb it so the run has consistency to recover
    Rng jitter(77);
    for (auto* p : trainer.student().parameters())
        for (double& v : p->value.data) v += 0.05 * jitter.normal();

    const auto& history = trainer.train();
    bool finite = true;
    for (const auto& b : history)
        finite = finite && std::isfinite(b.gen_adv) && std::isfinite(b.disc) &&
                 std::isfinite(b.distill) && std::isfinite(b.r1);

    auto moving_avg = [&](std::size_t from) {
        double acc = 0.0;
        for (std::size_t i = from; i < from + 20; ++i) acc += history[i].distill;
        return acc / 20.0;
    };
    double start = moving_avg(0);
    double end = moving_avg(history.size() - 20);
    bool frozen = trainer.teacher_checksum() == teacher0;
    bool dropped = end <= (1.0 - kA4LossDrop) * start;

    o.pass = finite && frozen && dropped;
    std::ostringstream ss;
    ss << "distill moving average " << start << " -> " << end << " ("
       << (start > 0 ? 100.0 * (1.0 - end / start) : 0.0) << "% drop, >= "
       << 100.0 * kA4LossDrop << "% required), losses finite " << (finite ? "yes" : "NO")
       << ", teacher bitwise frozen " << (frozen ? "yes" : "NO");
    o.detail = ss.str();
    return o;
}

Outcome criterion_a5() {
    Outcome o;
    auto ds = solid_color_dataset(4, 5, 3, 8);
    LabeledStore test = solid_color_store(4, 25, 3, 8, 0.02, 9);
    ConvNetSpec spec{3, 128};
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.seed = 3;
    ConvNetClassifier net = build_convnet(spec, 3, 4, 8, 3);
    train_classifier(net, ds, cfg);
    double acc = evaluate(net, test);

    // constant predictor: identical inputs force a constant argmax
    ConvNetClassifier fresh = build_convnet(spec, 3, 4, 8, 4);
    LabeledStore degenerate = test;
    std::size_t per = 3 * 8 * 8;
    for (std::size_t i = 1; i < degenerate.count(); ++i)
        std::copy(&degenerate.images.data.data[0], &degenerate.images.data.data[per],
                  &degenerate.images.data.data[i * per]);
    double const_acc = evaluate(fresh, degenerate);

    o.pass = acc >= kA5MinAccuracy && const_acc == 0.25;
    std::ostringstream ss;
    ss << "separable-set accuracy " << acc << " (>= " << kA5MinAccuracy
       << " required), constant predictor " << const_acc << " (exactly 0.25 required)";
    o.detail = ss.str();
    return o;
}

Outcome criterion_a6() {
    Outcome o;
    namespace fs = std::filesystem;
    fs::path root = fs::temp_directory_path() / "gendd_acceptance_a6";
    fs::remove_all(root);

    StubBackend backend;
    PromptTemplate tmpl{"{label}"};
    DatasetSpec spec;
    spec.name = "stub100";
    spec.registry = numbered_registry(100);
    spec.num_classes = 100;
    spec.resolution = 16;
    BudgetSpec budget;
    budget.ipc = 20;
    budget.num_classes = 100;
    GenerationConfig cfg;
    cfg.seed = 31;
    cfg.native_resolution = crop_source_size(16);

    auto run = distill_dataset(spec, budget, backend, tmpl, cfg, crop_source_size(16));
    AugmentationSpec aug;
    aug.crop_size = 16;
    aug.seed = 32;
    auto expanded = expand_dataset(run.dataset, aug, ExpansionPlan{5});

    save_distilled(expanded, root, {{"timing", timing_report(run)}});
    DistilledDataset loaded = load_distilled(root);
    bool round_trip = loaded.images.data.data == expanded.images.data.data &&
                      loaded.labels == expanded.labels &&
                      loaded.provenance == expanded.provenance && loaded.ipc == expanded.ipc;

    LabeledStore test = textured_store(100, 2, 3, 16, 0.1, 33);
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.seed = 34;
    EvalReport report =
        repeat_evaluate(loaded, test, ConvNetSpec{3, 16}, tcfg, 3, EvalMode::Desk, "stub100");

    bool recomputable = true;
    try {
        report.validate();
    } catch (...) {
        recomputable = false;
    }
    bool formatted = report.formatted().find("±") != std::string::npos;
    bool ipc_exact = loaded.ipc == 100 && loaded.count() == 10000;

    fs::remove_all(root);
    o.pass = round_trip && recomputable && formatted && ipc_exact;
    std::ostringstream ss;
    ss << "ipc 20 -> " << loaded.ipc << " over " << loaded.count()
       << " images, save/load round trip " << (round_trip ? "exact" : "VIOLATED") << ", report "
       << report.formatted() << " (recomputable " << (recomputable ? "yes" : "NO") << ")";
    o.detail = ss.str();
    return o;
}

Outcome criterion_a7() {
    Outcome o;
    const std::size_t classes = 5, res = 16;
    StubBackend backend_unused; // base sets come from solid colors instead
    (void)backend_unused;

    std::size_t wins = 0, ties = 0;
    double mean_base = 0.0, mean_pda = 0.0;
    const std::size_t seeds = 5;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        auto base = solid_color_dataset(classes, 10, 3, res);

        AugmentationSpec aug;
        aug.crop_size = res;
        aug.seed = derive_seed(s, {1});
        auto pda = expand_dataset(base, aug, ExpansionPlan{5});

        // test split: the class colors under global brightness shifts
        LabeledStore test = solid_color_store(classes, 30, 3, res, 0.0, 100 + s);
        Rng shift_rng = Rng::derive(s, {2});
        std::size_t per = 3 * res * res;
        for (std::size_t i = 0; i < test.count(); ++i) {
            double shift = shift_rng.uniform(-0.15, 0.15);
            for (std::size_t e = 0; e < per; ++e) {
                double& v = test.images.data.data[i * per + e];
                v = std::clamp(v + shift, 0.0, 1.0);
            }
        }

        TrainConfig cfg;
        cfg.epochs = 30;
        cfg.seed = derive_seed(s, {3});
        ConvNetSpec spec{2, 32};

        ConvNetClassifier net_base = build_convnet(spec, 3, classes, res, cfg.seed);
        train_classifier(net_base, base, cfg);
        double acc_base = evaluate(net_base, test);

        ConvNetClassifier net_pda = build_convnet(spec, 3, classes, res, cfg.seed);
        train_classifier(net_pda, pda, cfg);
        double acc_pda = evaluate(net_pda, test);

        mean_base += acc_base / seeds;
        mean_pda += acc_pda / seeds;
        if (acc_pda > acc_base) ++wins;
        if (acc_pda == acc_base) ++ties;
    }

    o.pass = mean_pda >= mean_base;
    std::ostringstream ss;
    ss << "mean accuracy with expansion " << mean_pda << " vs without " << mean_base << " ("
       << wins << " wins, " << ties << " ties over " << seeds << " paired seeds)";
    o.detail = ss.str();
    return o;
}

Outcome criterion_a8() {
    Outcome o;
    const char* cmd = std::getenv("GENDD_EXTERNAL_CMD");
    const char* cifar = std::getenv("GENDD_CIFAR_DIR");
    if (!cmd || !cifar) {
        o.skipped = true;
        o.detail = "optional, hardware-gated: set GENDD_EXTERNAL_CMD and GENDD_CIFAR_DIR to run";
        return o;
    }

    namespace fs = std::filesystem;
    fs::path work = fs::temp_directory_path() / "gendd_acceptance_a8";
    fs::remove_all(work);
    ExternalCommandBackend backend(cmd, work);

    DatasetSpec spec;
    spec.name = "cifar100";
    spec.registry = cifar100_registry();
    spec.num_classes = 100;
    spec.resolution = 32;
    BudgetSpec budget;
    budget.ipc = 20;
    budget.num_classes = 100;
    budget.wall_clock_seconds = 600.0;
    GenerationConfig cfg;
    cfg.native_resolution = crop_source_size(32);

    auto run = distill_dataset(spec, budget, backend, PromptTemplate{}, cfg, crop_source_size(32));
    AugmentationSpec aug;
    aug.crop_size = 32;
    auto expanded = expand_dataset(run.dataset, aug, ExpansionPlan{5});

    auto [train_store, test_store] = import_cifar100(cifar);
    (void)train_store;
    TrainConfig tcfg; // challenge defaults
    EvalReport report = repeat_evaluate(expanded, test_store, ConvNetSpec{}, tcfg, 3,
                                       EvalMode::Challenge, "cifar100");
    fs::remove_all(work);

    double delta = std::abs(report.mean - 0.0137);
    o.pass = delta <= kA8Tolerance;
    std::ostringstream ss;
    ss << "challenge-mode accuracy " << report.formatted() << ", |mean - 0.0137| = " << delta
       << " (<= " << kA8Tolerance << " required)";
    o.detail = ss.str();
    return o;
}

} // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<Outcome()> fn;
        bool optional;
    };
    std::vector<Entry> entries = {
        {"A1", criterion_a1, false}, {"A2", criterion_a2, false}, {"A3", criterion_a3, false},
        {"A4", criterion_a4, false}, {"A5", criterion_a5, false}, {"A6", criterion_a6, false},
        {"A7", criterion_a7, false}, {"A8", criterion_a8, true},
    };

    int failures = 0;
    for (auto& e : entries) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail = std::string("unexpected exception: ") + ex.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
        std::cout << e.name << " " << verdict << " [" << secs << " s] " << o.detail << "\n";
        if (!o.pass && !o.skipped && !e.optional) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
