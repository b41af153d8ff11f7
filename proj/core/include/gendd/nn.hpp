#pragma once

#include <cstdint>
#include <vector>

#include "gendd/rng.hpp"
#include "gendd/tensor.hpp"

namespace gendd::nn {

struct Param {
    Tensor value;
    Tensor grad;

    explicit Param(std::vector<std::size_t> shape) : value(shape), grad(std::move(shape)) {}
    void zero_grad() { grad.fill(0.0); }
};

void kaiming_uniform(Tensor& w, std::size_t fan_in, Rng& rng);

/// 3x3-style convolution, stride 1, via per-sample im2col + Eigen GEMM.
class Conv2d {
public:
    Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t ksize, std::size_t pad, Rng& rng);

    Tensor forward(const Tensor& x);       // caches input for backward
    Tensor backward(const Tensor& dy);     // accumulates param grads, returns dx

    /// Stateless passes for frozen use (no caching, no grad accumulation).
    Tensor apply(const Tensor& x) const;           // with bias
    Tensor apply_linear(const Tensor& x) const;    // without bias (exact JVP of apply)
    Tensor input_backward(const Tensor& x_shape_ref, const Tensor& dy) const; // VJP, dx only
    void accumulate_param_grads(const Tensor& x, const Tensor& dy);           // dW/db only

    Param weight; // [out_ch, in_ch * k * k]
    Param bias;   // [out_ch]
    std::size_t in_ch, out_ch, ksize, pad;

private:
    Tensor input_cache_;
};

class Linear {
public:
    Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng);

    Tensor forward(const Tensor& x); // [N, in] -> [N, out]
    Tensor backward(const Tensor& dy);

    Param weight; // [out, in]
    Param bias;   // [out]

private:
    Tensor input_cache_;
};

/// Per-sample, per-channel normalization over the spatial dims, with affine
/// scale/shift.
class InstanceNorm2d {
public:
    explicit InstanceNorm2d(std::size_t channels);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

    Param gamma; // [C]
    Param beta;  // [C]
    static constexpr double kEps = 1e-5;

private:
    Tensor xhat_cache_;
    Tensor inv_std_cache_; // [N, C]
};

class ReLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

private:
    Tensor mask_;
};

class SiLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

private:
    Tensor input_cache_;
};

class Tanh {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

private:
    Tensor output_cache_;
};

/// 2x2 average pooling, stride 2; odd trailing row/col is dropped.
class AvgPool2d {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

    static Tensor apply(const Tensor& x);
    static Tensor input_backward(const std::vector<std::size_t>& in_shape, const Tensor& dy);

private:
    std::vector<std::size_t> in_shape_;
};

/// Mean over all spatial positions: [N, C, H, W] -> [N, C].
class GlobalAvgPool {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

private:
    std::vector<std::size_t> in_shape_;
};

// --- losses ---------------------------------------------------------------

/// Mean cross entropy over the batch; fills dlogits with the gradient.
double softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels,
                             Tensor* dlogits);

std::size_t argmax_row(const Tensor& logits, std::size_t row);

// --- optimizers -----------------------------------------------------------

class SgdMomentum {
public:
    SgdMomentum(std::vector<Param*> params, double lr, double momentum, double weight_decay);
    void step();
    void zero_grad();

    double lr;

private:
    std::vector<Param*> params_;
    std::vector<Tensor> velocity_;
    double momentum_, weight_decay_;
};

/// Adam with decoupled weight decay.
class AdamW {
public:
    AdamW(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8, double weight_decay = 0.0);
    void step();
    void zero_grad();

    double lr;

private:
    std::vector<Param*> params_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_, weight_decay_;
    std::uint64_t t_ = 0;
};

std::uint64_t params_checksum(const std::vector<Param*>& params);

} // namespace gendd::nn
