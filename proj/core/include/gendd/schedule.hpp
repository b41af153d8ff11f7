#pragma once

#include <cstddef>
#include <vector>

#include "gendd/types.hpp"

namespace gendd {

/// Variance-preserving forward-process coefficients: alpha[t]^2 + sigma[t]^2 = 1,
/// alpha descending from 1, sigma ascending from 0, indexed t = 0..t_max().
struct NoiseSchedule {
    std::vector<double> alphas; // signal coefficients
    std::vector<double> sigmas; // noise coefficients

    std::size_t t_max() const { return alphas.size() - 1; }

    double alpha(std::size_t t) const;
    double sigma(std::size_t t) const;

    void validate() const;
};

/// Standard linear-beta schedule with alpha_bar accumulated over `steps`
/// diffusion steps; index 0 is the clean endpoint (alpha=1, sigma=0).
NoiseSchedule make_linear_beta_schedule(std::size_t steps = 1000, double beta_start = 1e-4,
                                        double beta_end = 2e-2);

/// x_t = alpha_t * x0 + sigma_t * eps, in symmetric-range semantics.
ImageBatch add_noise(const ImageBatch& x0, std::size_t t, const Tensor& eps,
                     const NoiseSchedule& schedule);

enum class WeightingKind { Exponential, Sds };

struct WeightingScheme {
    WeightingKind kind = WeightingKind::Exponential;
};

/// Distillation-loss weight c(t).
///  - exponential: the signal coefficient alpha_t.
///  - sds: alpha_t^2, i.e. the sigma_t^2 noise-residual weight mapped into
///    clean-sample space through the eps <-> x-hat change of variables.
double c_weight(std::size_t t, const WeightingScheme& scheme, const NoiseSchedule& schedule);

} // namespace gendd
