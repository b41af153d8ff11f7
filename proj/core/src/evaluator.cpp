#include "gendd/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "gendd/tensor.hpp"

namespace gendd {

void ConvNetSpec::validate(EvalMode mode, std::size_t resolution) const {
    if (depth == 0 || width == 0)
        throw std::invalid_argument("ConvNetSpec: depth and width must be positive");
    if (mode == EvalMode::Challenge && (depth != 3 || width != 128))
        throw std::invalid_argument("ConvNetSpec: challenge mode pins depth=3, width=128");
    if (resolution < (std::size_t{1} << depth))
        throw std::invalid_argument("ConvNetSpec: resolution too small for " +
                                    std::to_string(depth) + " pooling stages");
}

void TrainConfig::validate(EvalMode mode) const {
    if (!(lr > 0) || !(momentum >= 0) || !(weight_decay >= 0) || batch_size == 0)
        throw std::invalid_argument("TrainConfig: invalid hyperparameters");
    if (mode == EvalMode::Challenge &&
        (epochs != 1000 || lr != 0.01 || momentum != 0.9 || weight_decay != 0.0005))
        throw std::invalid_argument(
            "TrainConfig: challenge mode pins epochs=1000, lr=0.01, momentum=0.9, wd=0.0005");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},         {"lr", lr},
            {"momentum", momentum},     {"weight_decay", weight_decay},
            {"batch_size", batch_size}, {"seed", seed}};
}

ConvNetClassifier::ConvNetClassifier(const ConvNetSpec& spec, std::size_t channels,
                                     std::size_t num_classes, std::size_t resolution,
                                     std::uint64_t seed)
    : num_classes_(num_classes), init_rng_(seed) {
    (void)resolution;
    std::size_t in = channels;
    for (std::size_t b = 0; b < spec.depth; ++b) {
        blocks_.push_back(std::make_unique<Block>(Block{nn::Conv2d(in, spec.width, 3, 1, init_rng_),
                                                        nn::InstanceNorm2d(spec.width),
                                                        nn::ReLU{}, nn::AvgPool2d{}}));
        in = spec.width;
    }
    head_ = std::make_unique<nn::Linear>(spec.width, num_classes, init_rng_);
}

std::vector<nn::Param*> ConvNetClassifier::parameters() {
    std::vector<nn::Param*> ps;
    for (auto& b : blocks_) {
        ps.push_back(&b->conv.weight);
        ps.push_back(&b->conv.bias);
        ps.push_back(&b->norm.gamma);
        ps.push_back(&b->norm.beta);
    }
    ps.push_back(&head_->weight);
    ps.push_back(&head_->bias);
    return ps;
}

std::uint64_t ConvNetClassifier::checksum() const {
    auto* self = const_cast<ConvNetClassifier*>(this);
    return nn::params_checksum(self->parameters());
}

Tensor ConvNetClassifier::forward(const Tensor& x) {
    Tensor h = x;
    for (auto& b : blocks_) {
        h = b->conv.forward(h);
        h = b->norm.forward(h);
        h = b->act.forward(h);
        h = b->pool.forward(h);
    }
    h = gap_.forward(h);
    return head_->forward(h);
}

void ConvNetClassifier::backward(const Tensor& dlogits) {
    Tensor d = head_->backward(dlogits);
    d = gap_.backward(d);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
        d = (*it)->pool.backward(d);
        d = (*it)->act.backward(d);
        d = (*it)->norm.backward(d);
        d = (*it)->conv.backward(d);
    }
}

ConvNetClassifier build_convnet(const ConvNetSpec& spec, std::size_t channels,
                                std::size_t num_classes, std::size_t resolution,
                                std::uint64_t seed) {
    return ConvNetClassifier(spec, channels, num_classes, resolution, seed);
}

std::vector<double> train_classifier(ConvNetClassifier& model, const DistilledDataset& ds,
                                     const TrainConfig& cfg) {
    ds.validate();
    std::size_t n = ds.count();
    if (n == 0) throw std::invalid_argument("train_classifier: empty dataset");
    std::size_t bs = std::min<std::size_t>(cfg.batch_size, n);
    std::size_t c = ds.images.channels(), h = ds.images.height(), w = ds.images.width();
    std::size_t per = c * h * w;

    nn::SgdMomentum opt(model.parameters(), cfg.lr, cfg.momentum, cfg.weight_decay);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> curve;
    curve.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = Rng::derive(cfg.seed, {11, epoch});
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            std::size_t m = std::min(bs, n - start);
            Tensor x({m, c, h, w});
            std::vector<std::size_t> labels(m);
            for (std::size_t j = 0; j < m; ++j) {
                std::size_t src = order[start + j];
                std::copy(&ds.images.data.data[src * per], &ds.images.data.data[(src + 1) * per],
                          &x.data[j * per]);
                labels[j] = ds.labels[src];
            }
            Tensor logits = model.forward(x);
            Tensor dlogits;
            double loss = nn::softmax_cross_entropy(logits, labels, &dlogits);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_classifier: diverged at epoch " +
                                         std::to_string(epoch) + "; last finite epoch " +
                                         (epoch == 0 ? std::string("none")
                                                     : std::to_string(epoch - 1)));
            opt.zero_grad();
            model.backward(dlogits);
            opt.step();
            epoch_loss += loss;
            ++batches;
        }
        curve.push_back(epoch_loss / static_cast<double>(batches));
    }
    return curve;
}

double evaluate(ConvNetClassifier& model, const LabeledStore& test) {
    std::size_t n = test.count();
    if (n == 0) throw std::invalid_argument("evaluate: empty test set");
    std::size_t c = test.images.channels(), h = test.images.height(), w = test.images.width();
    std::size_t per = c * h * w;
    std::size_t correct = 0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < n; start += chunk) {
        std::size_t m = std::min(chunk, n - start);
        Tensor x({m, c, h, w});
        std::copy(&test.images.data.data[start * per], &test.images.data.data[(start + m) * per],
                  x.data.begin());
        Tensor logits = model.forward(x);
        for (std::size_t j = 0; j < m; ++j)
            if (nn::argmax_row(logits, j) == test.labels[start + j]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

std::string format_mean_std(double mean, double stddev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f±%.4f", mean, stddev);
    return buf;
}

void EvalReport::validate() const {
    if (per_run_acc.empty()) throw std::invalid_argument("EvalReport: no runs");
    double m = std::accumulate(per_run_acc.begin(), per_run_acc.end(), 0.0) /
               static_cast<double>(per_run_acc.size());
    if (std::abs(m - mean) > 1e-12 || std::abs(sample_std(per_run_acc, m) - stddev) > 1e-12)
        throw std::invalid_argument("EvalReport: mean/std inconsistent with per-run accuracies");
    for (double a : per_run_acc)
        if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("EvalReport: accuracy out of range");
}

std::string EvalReport::formatted() const { return format_mean_std(mean, stddev); }

nlohmann::json EvalReport::to_json() const {
    return {{"per_run_acc", per_run_acc}, {"mean", mean},
            {"std", stddev},              {"formatted", formatted()},
            {"dataset", dataset_name},    {"ipc", ipc},
            {"config_hash", config_hash}};
}

namespace {
std::string hash_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}
} // namespace

EvalReport repeat_evaluate(const DistilledDataset& ds, const LabeledStore& test,
                           const ConvNetSpec& spec, const TrainConfig& cfg, std::size_t repeats,
                           EvalMode mode, const std::string& dataset_name) {
    if (repeats < 1) throw std::invalid_argument("repeat_evaluate: repeats must be >= 1");
    if (mode == EvalMode::Challenge && repeats != 3)
        throw std::invalid_argument("repeat_evaluate: challenge mode pins repeats=3");
    std::size_t res = ds.images.height();
    spec.validate(mode, res);
    cfg.validate(mode);
    if (ds.registry.count() != test.registry.count())
        throw std::invalid_argument("repeat_evaluate: label spaces differ");

    EvalReport report;
    report.dataset_name = dataset_name;
    report.ipc = ds.ipc;
    for (std::size_t r = 0; r < repeats; ++r) {
        std::uint64_t run_seed = derive_seed(cfg.seed, {31, r});
        ConvNetClassifier model =
            build_convnet(spec, ds.images.channels(), ds.registry.count(), res, run_seed);
        TrainConfig run_cfg = cfg;
        run_cfg.seed = run_seed;
        train_classifier(model, ds, run_cfg);
        report.per_run_acc.push_back(evaluate(model, test));
    }
    report.mean = std::accumulate(report.per_run_acc.begin(), report.per_run_acc.end(), 0.0) /
                  static_cast<double>(repeats);
    report.stddev = sample_std(report.per_run_acc, report.mean);

    nlohmann::json cj = cfg.to_json();
    cj["depth"] = spec.depth;
    cj["width"] = spec.width;
    cj["repeats"] = repeats;
    cj["mode"] = mode == EvalMode::Challenge ? "challenge" : "desk";
    report.config_hash = hash_hex(cj.dump());
    report.validate();
    return report;
}

} // namespace gendd
