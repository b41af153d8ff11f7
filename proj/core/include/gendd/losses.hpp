#pragma once

#include <vector>

#include "gendd/schedule.hpp"
#include "gendd/tensor.hpp"
#include "gendd/types.hpp"

namespace gendd {

/// Per-sample scalar outputs of the K discriminator heads, shape [N, K].
struct HeadOutputs {
    Tensor values;

    std::size_t count() const { return values.shape.empty() ? 0 : values.shape[0]; }
    std::size_t heads() const { return values.shape[1]; }

    void validate() const {
        if (values.shape.size() != 2) throw std::invalid_argument("HeadOutputs: expected [N, K]");
        if (values.shape[1] < 1) throw std::invalid_argument("HeadOutputs: need at least one head");
        if (!all_finite(values)) throw std::invalid_argument("HeadOutputs: non-finite values");
    }
};

/// Student timesteps {tau_1, ..., tau_n}: non-empty, strictly increasing,
/// all within the schedule range.
struct TimestepSet {
    std::vector<std::size_t> taus;

    void validate(std::size_t t_max) const {
        if (taus.empty()) throw std::invalid_argument("TimestepSet: empty");
        for (std::size_t i = 0; i < taus.size(); ++i) {
            if (taus[i] > t_max) throw std::invalid_argument("TimestepSet: timestep out of range");
            if (i > 0 && taus[i] <= taus[i - 1])
                throw std::invalid_argument("TimestepSet: not strictly increasing");
        }
    }
};

/// The three objectives of one training step plus diagnostics.
struct AddLossBundle {
    double gen_adv = 0.0;
    double disc = 0.0;
    double distill = 0.0;
    double r1 = 0.0;
    std::vector<double> per_head_means;
};

/// Anything the R1 penalty can differentiate through: head evaluation plus
/// the per-sample input gradient of the summed head outputs.
class InputDifferentiableHeads {
public:
    virtual ~InputDifferentiableHeads() = default;
    virtual HeadOutputs eval(const ImageBatch& x) = 0;
    /// d/dx sum_k D_k(F_k(x)), per sample; same shape as x.
    virtual Tensor input_gradient(const ImageBatch& x) = 0;
};

/// Heads acting linearly on flattened pixels: D_k(x) = w_k . x + b_k.
/// Used as the analytic oracle in gradient tests and as the simplest
/// production head map.
class LinearPixelHeads : public InputDifferentiableHeads {
public:
    LinearPixelHeads(std::size_t heads, std::size_t input_dim);

    HeadOutputs eval(const ImageBatch& x) override;
    Tensor input_gradient(const ImageBatch& x) override;

    Tensor weights; // [K, D]
    Tensor biases;  // [K]
};

// --- Objectives -----------------------------------------------------------

/// Generator adversarial loss: -mean_n sum_k D_k.
double generator_adversarial_loss(const HeadOutputs& fake_heads);

/// d(loss)/d(fake_heads), same shape.
Tensor generator_adversarial_grad(const HeadOutputs& fake_heads);

/// R1 penalty: mean_n || grad_x sum_k D_k(F_k(x)) ||^2 at the real samples.
double r1_penalty(InputDifferentiableHeads& heads, const ImageBatch& x0);

/// Same penalty from an already-computed per-sample input gradient [N, ...].
double r1_from_input_gradient(const Tensor& g);

/// Hinge discriminator loss with the R1 term added once per step:
/// mean_real sum_k max(0, 1 - D) + gamma*r1 + mean_fake sum_k max(0, 1 + D).
double discriminator_hinge_loss(const HeadOutputs& real_heads, const HeadOutputs& fake_heads,
                                double r1, double gamma);

/// Subgradients of the hinge terms w.r.t. the head outputs.
Tensor hinge_grad_real(const HeadOutputs& real_heads);
Tensor hinge_grad_fake(const HeadOutputs& fake_heads);

/// Weighted L2 distillation loss: c(t) * mean over elements of (s - t)^2.
/// The teacher output must come from the stop-gradient path; that contract
/// is enforced by the trainer, not here.
double distillation_loss(const ImageBatch& student_out, const ImageBatch& teacher_out,
                         std::size_t t, const WeightingScheme& scheme,
                         const NoiseSchedule& schedule);

/// d(loss)/d(student_out) with the teacher output held constant.
Tensor distillation_grad(const ImageBatch& student_out, const ImageBatch& teacher_out,
                         std::size_t t, const WeightingScheme& scheme,
                         const NoiseSchedule& schedule);

} // namespace gendd
