#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "gendd/augment.hpp"
#include "gendd/dataset_io.hpp"
#include "gendd/evaluator.hpp"
#include "gendd/generation.hpp"
#include "gendd/png_io.hpp"
#include "gendd/synthetic.hpp"
#include "gendd/trainer.hpp"

namespace fs = std::filesystem;
using namespace gendd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitBudgetPartial = 2;
constexpr int kConfigVersion = 1;

std::string device() {
    const char* d = std::getenv("GENDD_DEVICE");
    return d ? d : "cpu";
}

void write_config_echo(const fs::path& out_dir, const std::string& command,
                       const nlohmann::json& params) {
    nlohmann::json echo = {{"version", kConfigVersion},
                           {"command", command},
                           {"device", device()},
                           {"params", params}};
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "run_config.json") << echo.dump(2) << "\n";
}

LabelRegistry registry_for(const std::string& dataset, std::size_t classes) {
    if (dataset == "cifar100") return cifar100_registry();
    return numbered_registry(classes);
}

LabeledStore load_test_store(const fs::path& path, const DatasetSpec& spec) {
    if (path.extension() == ".bin") return import_cifar100_file(path);
    return import_image_directory(path, spec);
}

struct DistillArgs {
    std::string dataset = "cifar100";
    std::size_t classes = 100;
    std::size_t resolution = 32;
    std::size_t ipc = 20;
    double budget_seconds = 600.0;
    std::string backend = "stub";
    std::string checkpoint;
    std::string external_command;
    std::string template_text = "a photo of a {label}";
    std::uint64_t seed = 0;
    std::string out;
    bool pda = false;
    std::size_t factor = 5;
};

int cmd_distill(const DistillArgs& a) {
    if (a.dataset == "cifar100") {
        // canonical label set; --classes is ignored for named datasets
    }
    DatasetSpec spec;
    spec.name = a.dataset;
    spec.registry = registry_for(a.dataset, a.classes);
    spec.num_classes = spec.registry.count();
    spec.resolution = a.resolution;
    spec.validate();

    BudgetSpec budget;
    budget.wall_clock_seconds = a.budget_seconds;
    budget.ipc = a.ipc;
    budget.num_classes = spec.num_classes;

    PromptTemplate tmpl{a.template_text};
    GenerationConfig gcfg;
    gcfg.seed = a.seed;
    std::size_t work_res = a.pda ? crop_source_size(a.resolution) : a.resolution;
    gcfg.native_resolution = work_res;

    std::unique_ptr<GeneratorBackend> backend;
    if (a.backend == "stub") {
        backend = std::make_unique<StubBackend>();
    } else if (a.backend == "toy") {
        if (a.checkpoint.empty() || !fs::exists(a.checkpoint)) {
            std::cerr << "toy backend needs --checkpoint pointing at a trained student\n";
            return kExitFailure;
        }
        backend = std::make_unique<ToyStudentBackend>(load_student_checkpoint(a.checkpoint),
                                                      spec.registry, tmpl);
    } else if (a.backend == "external") {
        if (a.external_command.empty()) {
            std::cerr << "external backend needs --external-command\n";
            return kExitFailure;
        }
        backend = std::make_unique<ExternalCommandBackend>(a.external_command,
                                                           fs::path(a.out) / "external_work");
    } else {
        std::cerr << "unknown backend '" << a.backend << "'\n";
        return kExitFailure;
    }

    nlohmann::json params = {{"dataset", a.dataset},
                             {"classes", spec.num_classes},
                             {"resolution", a.resolution},
                             {"ipc", a.ipc},
                             {"budget_seconds", a.budget_seconds},
                             {"backend", a.backend},
                             {"template", a.template_text},
                             {"seed", a.seed},
                             {"pda", a.pda},
                             {"factor", a.factor},
                             {"out", a.out}};

    if (a.ipc == 0) {
        DistilledDataset empty;
        empty.registry = spec.registry;
        empty.images.data = Tensor({0, 3, a.resolution, a.resolution});
        save_distilled(empty, a.out, {{"note", "empty ipc=0 run"}});
        write_config_echo(a.out, "distill", params);
        std::cout << "distilled 0 images\n";
        return kExitOk;
    }

    DistillRun run = distill_dataset(spec, budget, *backend, tmpl, gcfg, work_res);
    DistilledDataset ds = std::move(run.dataset);

    nlohmann::json extra;
    if (a.pda) {
        AugmentationSpec aug;
        aug.crop_size = a.resolution;
        aug.seed = derive_seed(a.seed, {7});
        ExpansionPlan plan{a.factor};
        ds = expand_dataset(ds, aug, plan);
        extra["augmentation"] = aug.to_json();
        extra["factor"] = a.factor;
    }

    auto t0 = std::chrono::steady_clock::now();
    extra["timing"] = timing_report(run);
    save_distilled(ds, a.out, extra);
    run.timing.saving_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_config_echo(a.out, "distill", params);

    std::cout << timing_report(run).dump(2) << "\n";
    std::cout << "distilled " << ds.count() << " images (ipc " << ds.ipc << ")\n";
    return run.timing.aborted ? kExitBudgetPartial : kExitOk;
}

struct EvaluateArgs {
    std::string distilled;
    std::string test;
    std::size_t repeats = 3;
    std::string mode = "challenge";
    std::size_t epochs = 1000;
    std::size_t depth = 3;
    std::size_t width = 128;
    std::size_t batch_size = 256;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a) {
    DistilledDataset ds = load_distilled(a.distilled);

    DatasetSpec test_spec;
    test_spec.name = "test";
    test_spec.registry = ds.registry;
    test_spec.num_classes = ds.registry.count();
    test_spec.resolution = ds.images.height();
    LabeledStore test = load_test_store(a.test, test_spec);
    if (test.registry.count() != ds.registry.count())
        throw std::invalid_argument("test split label space does not match distilled dataset");

    EvalMode mode = a.mode == "challenge" ? EvalMode::Challenge : EvalMode::Desk;
    ConvNetSpec spec{a.depth, a.width};
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.lr = a.lr;
    cfg.momentum = a.momentum;
    cfg.weight_decay = a.weight_decay;
    cfg.batch_size = a.batch_size;
    cfg.seed = a.seed;

    EvalReport report = repeat_evaluate(ds, test, spec, cfg, a.repeats, mode, a.distilled);

    fs::path out = a.out.empty() ? fs::path(a.distilled) / "eval_report.json" : fs::path(a.out);
    fs::create_directories(out.parent_path());
    nlohmann::json j = report.to_json();
    j["version"] = kConfigVersion;
    j["config"] = cfg.to_json();
    j["config"]["depth"] = a.depth;
    j["config"]["width"] = a.width;
    j["config"]["repeats"] = a.repeats;
    j["config"]["mode"] = a.mode;
    j["config"]["device"] = device();
    std::ofstream(out) << j.dump(2) << "\n";

    std::cout << report.formatted() << "\n";
    return kExitOk;
}

struct GridArgs {
    std::string distilled;
    std::size_t classes = 10;
    std::size_t factor = 5;
    std::string out;
};

int cmd_grid(const GridArgs& a) {
    DistilledDataset ds = load_distilled(a.distilled);
    if (ds.registry.count() < a.classes)
        throw std::invalid_argument("grid: dataset has " + std::to_string(ds.registry.count()) +
                                    " classes, requested " + std::to_string(a.classes));
    if (ds.ipc < a.factor)
        throw std::invalid_argument("grid: dataset ipc below requested per-class column count");

    std::size_t res = ds.images.height();
    std::size_t ch = ds.images.channels();
    PngImage grid;
    grid.width = a.factor * res;
    grid.height = a.classes * res;
    grid.channels = ch;
    grid.pixels.assign(grid.width * grid.height * ch, 0.0);

    // dataset order is class-major, so class c occupies [c*ipc, (c+1)*ipc)
    for (std::size_t c = 0; c < a.classes; ++c) {
        for (std::size_t k = 0; k < a.factor; ++k) {
            std::size_t idx = c * ds.ipc + k;
            for (std::size_t y = 0; y < res; ++y)
                for (std::size_t x = 0; x < res; ++x)
                    for (std::size_t p = 0; p < ch; ++p)
                        grid.pixels[((c * res + y) * grid.width + k * res + x) * ch + p] =
                            ds.images.data.at4(idx, p, y, x);
        }
    }
    fs::create_directories(fs::path(a.out).parent_path());
    write_png16(a.out, grid);
    std::cout << "wrote " << a.classes << "x" << a.factor << " grid to " << a.out << "\n";
    return kExitOk;
}

struct TrainArgs {
    bool toy = true;
    std::string data;
    std::size_t res = 8;
    std::size_t per_class = 32;
    std::size_t steps = 500;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double gamma = 1e-5;
    double lambda_distill = 1.0;
    std::string weighting = "exponential";
    std::string out = "student_checkpoint.json";
};

int cmd_train(const TrainArgs& a) {
    LabeledStore data;
    if (!a.data.empty()) {
        data = import_cifar100_file(a.data);
    } else {
        data = two_class_toy(a.res, a.per_class, derive_seed(a.seed, {1}));
    }

    AddTrainConfig cfg;
    cfg.steps = a.steps;
    cfg.batch_size = a.batch_size;
    cfg.seed = a.seed;
    cfg.gamma = a.gamma;
    cfg.lambda_distill = a.lambda_distill;
    cfg.scheme.kind = a.weighting == "sds" ? WeightingKind::Sds : WeightingKind::Exponential;
    cfg.out_dir = fs::path(a.out).parent_path();
    if (!cfg.out_dir->empty()) fs::create_directories(*cfg.out_dir);

    AddTrainer trainer(data.images, data.labels, data.registry.count(), cfg);
    const auto& history = trainer.train();
    trainer.save_checkpoint(a.out);

    fs::path out_dir = fs::path(a.out).parent_path();
    if (out_dir.empty()) out_dir = ".";
    std::ofstream(out_dir / "train_history.json") << history_to_json(history).dump(2) << "\n";
    write_config_echo(out_dir, "train",
                      {{"steps", a.steps},
                       {"batch_size", a.batch_size},
                       {"seed", a.seed},
                       {"gamma", a.gamma},
                       {"lambda_distill", a.lambda_distill},
                       {"weighting", a.weighting},
                       {"data", a.data.empty() ? "toy" : a.data},
                       {"out", a.out}});

    std::cout << "trained " << history.size() << " steps";
    if (!history.empty()) std::cout << "; final distill loss " << history.back().distill;
    std::cout << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"generative dataset distillation pipeline"};
    app.require_subcommand(1);

    DistillArgs da;
    auto* distill = app.add_subcommand("distill", "generate a distilled dataset");
    distill->add_option("--dataset", da.dataset, "dataset name (cifar100 or custom)");
    distill->add_option("--classes", da.classes, "class count for custom datasets");
    distill->add_option("--resolution", da.resolution, "target resolution");
    distill->add_option("--ipc", da.ipc, "images per class");
    distill->add_option("--budget-seconds", da.budget_seconds, "wall-clock budget");
    distill->add_option("--backend", da.backend, "stub, toy or external");
    distill->add_option("--checkpoint", da.checkpoint, "student checkpoint for the toy backend");
    distill->add_option("--external-command", da.external_command, "external backend command");
    distill->add_option("--template", da.template_text, "prompt template with {label}");
    distill->add_option("--seed", da.seed, "run seed");
    distill->add_option("--out", da.out, "output directory")->required();
    distill->add_flag("--pda", da.pda, "expand with post augmentation");
    distill->add_option("--factor", da.factor, "expansion factor including the original");

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "train the fixed classifier and report");
    evaluate->add_option("--distilled", ea.distilled, "distilled dataset directory")->required();
    evaluate->add_option("--test", ea.test, "test split (.bin or image directory)")->required();
    evaluate->add_option("--repeats", ea.repeats, "evaluation repeats");
    evaluate->add_option("--mode", ea.mode, "challenge or desk");
    evaluate->add_option("--epochs", ea.epochs, "training epochs (desk mode)");
    evaluate->add_option("--depth", ea.depth, "conv blocks (desk mode)");
    evaluate->add_option("--width", ea.width, "conv width (desk mode)");
    evaluate->add_option("--batch-size", ea.batch_size, "batch size");
    evaluate->add_option("--lr", ea.lr, "learning rate (desk mode)");
    evaluate->add_option("--momentum", ea.momentum, "momentum (desk mode)");
    evaluate->add_option("--weight-decay", ea.weight_decay, "weight decay (desk mode)");
    evaluate->add_option("--seed", ea.seed, "evaluation seed");
    evaluate->add_option("--out", ea.out, "report path");

    GridArgs ga;
    auto* grid = app.add_subcommand("grid", "dump a class-by-variant image grid");
    grid->add_option("--distilled", ga.distilled, "distilled dataset directory")->required();
    grid->add_option("--classes", ga.classes, "rows (classes)");
    grid->add_option("--factor", ga.factor, "columns (variants per class)");
    grid->add_option("--out", ga.out, "output PNG path")->required();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train the one-step student");
    train->add_option("--data", ta.data, "real data (.bin); omitted = built-in toy set");
    train->add_option("--res", ta.res, "toy set resolution");
    train->add_option("--per-class", ta.per_class, "toy set images per class");
    train->add_option("--steps", ta.steps, "training steps");
    train->add_option("--batch-size", ta.batch_size, "batch size");
    train->add_option("--seed", ta.seed, "run seed");
    train->add_option("--gamma", ta.gamma, "gradient penalty weight");
    train->add_option("--lambda", ta.lambda_distill, "distillation weight");
    train->add_option("--weighting", ta.weighting, "exponential or sds");
    train->add_option("--out", ta.out, "checkpoint path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*distill) return cmd_distill(da);
        if (*evaluate) return cmd_evaluate(ea);
        if (*grid) return cmd_grid(ga);
        if (*train) return cmd_train(ta);
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << "\n"
                  << timing_to_json(e.timing).dump(2) << "\n";
        return kExitBudgetPartial;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
