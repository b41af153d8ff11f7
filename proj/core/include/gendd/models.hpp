#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "gendd/losses.hpp"
#include "gendd/nn.hpp"
#include "gendd/rng.hpp"
#include "gendd/types.hpp"

namespace gendd {

/// Small conditional denoiser predicting the clean sample directly:
/// x_hat(x_t, t, class) with a tanh output, so predictions stay in the
/// symmetric range. Class-index embedding is added to the timestep
/// embedding; the last embedding row is the unconditional slot.
class CondDenoiser {
public:
    CondDenoiser(std::size_t channels, std::size_t num_classes, std::size_t hidden,
                 std::size_t emb_dim, std::uint64_t seed);

    /// cond ids in [0, num_classes]; num_classes selects the unconditional
    /// embedding. One timestep per batch.
    Tensor forward(const Tensor& x, std::size_t t, const std::vector<std::size_t>& cond);

    /// Backprop from d(loss)/d(output); accumulates parameter grads and
    /// returns d(loss)/d(input). Must follow a forward on the same batch.
    Tensor backward(const Tensor& dy);

    std::vector<nn::Param*> parameters();
    void copy_parameters_from(const CondDenoiser& other);

    nlohmann::json state_to_json() const;
    void load_state(const nlohmann::json& j);

    std::size_t channels() const { return channels_; }
    std::size_t num_classes() const { return num_classes_; }
    std::size_t unconditional_id() const { return num_classes_; }

    nn::Param& class_table() { return class_table_; }

private:
    Tensor timestep_embedding(std::size_t t) const;

    std::size_t channels_, num_classes_, hidden_, emb_dim_;
    Rng init_rng_; // consumed during construction only; declared before the layers
    nn::Param class_table_; // [num_classes + 1, emb_dim]
    nn::Linear emb_linear_;
    nn::Conv2d conv1_, conv2_, conv3_;
    nn::SiLU emb_act_, act1_, act2_;
    nn::Tanh out_act_;

    // backward bookkeeping
    std::vector<std::size_t> cond_cache_;
    Tensor emb_in_cache_; // [N, emb_dim]
};

/// Frozen two-tap convolutional feature extractor standing in for the ViT.
/// Stateless passes: activations travel in an explicit struct so VJP and JVP
/// can be evaluated against any cached forward.
class FeatureEncoder {
public:
    struct Acts {
        std::vector<std::size_t> x_shape;
        Tensor mask1;                  // relu mask after conv1
        std::vector<std::size_t> pool_in_shape;
        Tensor mask2;                  // relu mask after conv2
        std::vector<Tensor> taps;      // K flattened feature maps [N, D_k]
    };

    FeatureEncoder(std::size_t channels, std::size_t width, std::uint64_t seed);

    Acts forward_taps(const Tensor& x) const;

    /// Reverse pass: cotangents on the taps -> gradient w.r.t. the input.
    Tensor vjp(const Acts& acts, const std::vector<Tensor>& tap_cotangents) const;

    /// Forward linearization: input tangent -> tap tangents.
    std::vector<Tensor> jvp(const Acts& acts, const Tensor& dx) const;

    /// Accumulates conv parameter grads from tap cotangents (used only while
    /// pretraining; the trainer never calls this). Returns d(loss)/d(input).
    Tensor backward_params(const Tensor& x, const Acts& acts,
                           const std::vector<Tensor>& tap_cotangents);

    static constexpr std::size_t kTaps = 2;
    std::size_t tap_dim(std::size_t k, std::size_t h, std::size_t w) const;

    std::vector<nn::Param*> parameters();
    std::uint64_t checksum() const;

private:
    std::size_t channels_, width_;
    Rng init_rng_;
    nn::Conv2d conv1_, conv2_;
};

/// Briefly fits the encoder as a classifier trunk on labeled data, then the
/// caller treats it as frozen. Returns the final training loss.
double pretrain_feature_encoder(FeatureEncoder& encoder, const ImageBatch& images,
                                const std::vector<std::size_t>& labels, std::size_t num_classes,
                                std::size_t steps, std::size_t batch_size, double lr,
                                std::uint64_t seed);

/// Learnable scalar heads over the frozen extractor taps.
class DiscriminatorStack : public InputDifferentiableHeads {
public:
    DiscriminatorStack(FeatureEncoder* encoder, std::size_t channels, std::size_t resolution,
                       std::uint64_t seed);

    HeadOutputs eval(const ImageBatch& x) override;
    Tensor input_gradient(const ImageBatch& x) override;

    HeadOutputs heads_from_acts(const FeatureEncoder::Acts& acts) const;

    /// Accumulates head-parameter grads from d(loss)/d(head outputs).
    void head_backward(const FeatureEncoder::Acts& acts, const Tensor& dhead);

    /// d(loss)/d(input) through heads and frozen extractor.
    Tensor input_backward(const FeatureEncoder::Acts& acts, const Tensor& dhead) const;

    /// Per-sample gradient of sum_k D_k w.r.t. the input (the R1 integrand).
    Tensor summed_head_input_gradient(const FeatureEncoder::Acts& acts) const;

    /// Adds scale * d(R1)/d(head weights), given the per-sample input
    /// gradients g returned by summed_head_input_gradient.
    void accumulate_r1_grad(const FeatureEncoder::Acts& acts, const Tensor& g, double scale);

    std::vector<nn::Param*> parameters();
    FeatureEncoder& encoder() { return *encoder_; }
    std::size_t head_count() const { return weights_.size(); }

private:
    FeatureEncoder* encoder_;
    std::vector<nn::Param> weights_; // per tap, [D_k]
    std::vector<nn::Param> biases_;  // per tap, [1]
};

nlohmann::json params_to_json(const std::vector<nn::Param*>& params);
void params_from_json(const nlohmann::json& j, const std::vector<nn::Param*>& params);

} // namespace gendd
