#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gendd/nn.hpp"
#include "gendd/rng.hpp"
#include "gendd/types.hpp"

namespace gendd {

enum class EvalMode { Challenge, Desk };

/// Fixed evaluation classifier family: depth conv blocks of `width` channels,
/// each conv(3x3) -> instance norm -> relu -> 2x avg pool, then a global
/// average pool and a linear head. Challenge mode pins (3, 128).
struct ConvNetSpec {
    std::size_t depth = 3;
    std::size_t width = 128;

    void validate(EvalMode mode, std::size_t resolution) const;
};

struct TrainConfig {
    std::size_t epochs = 1000;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::size_t batch_size = 256; // clamped to the dataset size
    std::uint64_t seed = 0;

    void validate(EvalMode mode) const;
    nlohmann::json to_json() const;
};

class ConvNetClassifier {
public:
    ConvNetClassifier(const ConvNetSpec& spec, std::size_t channels, std::size_t num_classes,
                      std::size_t resolution, std::uint64_t seed);

    Tensor forward(const Tensor& x); // [N,C,H,W] -> logits [N, num_classes]
    void backward(const Tensor& dlogits);

    std::vector<nn::Param*> parameters();
    std::uint64_t checksum() const;

    std::size_t num_classes() const { return num_classes_; }

private:
    struct Block {
        nn::Conv2d conv;
        nn::InstanceNorm2d norm;
        nn::ReLU act;
        nn::AvgPool2d pool;
    };

    std::size_t num_classes_;
    Rng init_rng_;
    std::vector<std::unique_ptr<Block>> blocks_;
    nn::GlobalAvgPool gap_;
    std::unique_ptr<nn::Linear> head_;
};

ConvNetClassifier build_convnet(const ConvNetSpec& spec, std::size_t channels,
                                std::size_t num_classes, std::size_t resolution,
                                std::uint64_t seed);

/// Momentum-SGD cross-entropy training on the distilled images. Deterministic
/// under the config seed; throws on divergence, naming the last finite epoch.
/// Returns the per-epoch mean training loss.
std::vector<double> train_classifier(ConvNetClassifier& model, const DistilledDataset& ds,
                                     const TrainConfig& cfg);

/// Top-1 accuracy on a labeled store.
double evaluate(ConvNetClassifier& model, const LabeledStore& test);

struct EvalReport {
    std::vector<double> per_run_acc;
    double mean = 0.0;
    double stddev = 0.0; // sample std
    std::string dataset_name;
    std::size_t ipc = 0;
    std::string config_hash;

    void validate() const; // mean/std recomputable from per_run_acc
    std::string formatted() const; // "0.0478±0.0018"
    nlohmann::json to_json() const;
};

double sample_std(const std::vector<double>& xs, double mean);
std::string format_mean_std(double mean, double stddev);

/// Fresh model per run with run-derived seeds; challenge mode fixes
/// repeats = 3 and the pinned hyperparameters.
EvalReport repeat_evaluate(const DistilledDataset& ds, const LabeledStore& test,
                           const ConvNetSpec& spec, const TrainConfig& cfg, std::size_t repeats,
                           EvalMode mode, const std::string& dataset_name = "");

} // namespace gendd
