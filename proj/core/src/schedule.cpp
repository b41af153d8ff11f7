#include "gendd/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace gendd {

double NoiseSchedule::alpha(std::size_t t) const {
    if (t >= alphas.size()) throw std::out_of_range("NoiseSchedule: t out of range");
    return alphas[t];
}

double NoiseSchedule::sigma(std::size_t t) const {
    if (t >= sigmas.size()) throw std::out_of_range("NoiseSchedule: t out of range");
    return sigmas[t];
}

void NoiseSchedule::validate() const {
    if (alphas.size() < 2 || alphas.size() != sigmas.size())
        throw std::invalid_argument("NoiseSchedule: need matching alpha/sigma vectors");
    if (std::abs(alphas[0] - 1.0) > 1e-9 || std::abs(sigmas[0]) > 1e-9)
        throw std::invalid_argument("NoiseSchedule: clean endpoint must have alpha=1, sigma=0");
    for (std::size_t t = 0; t + 1 < alphas.size(); ++t) {
        if (!(alphas[t + 1] < alphas[t])) throw std::invalid_argument("NoiseSchedule: alphas not strictly descending");
        if (!(sigmas[t + 1] > sigmas[t])) throw std::invalid_argument("NoiseSchedule: sigmas not strictly ascending");
    }
    for (std::size_t t = 0; t < alphas.size(); ++t) {
        double vp = alphas[t] * alphas[t] + sigmas[t] * sigmas[t];
        if (std::abs(vp - 1.0) > 1e-9)
            throw std::invalid_argument("NoiseSchedule: not variance-preserving at t=" + std::to_string(t));
    }
}

NoiseSchedule make_linear_beta_schedule(std::size_t steps, double beta_start, double beta_end) {
    NoiseSchedule s;
    s.alphas.resize(steps + 1);
    s.sigmas.resize(steps + 1);
    s.alphas[0] = 1.0;
    s.sigmas[0] = 0.0;
    double alpha_bar = 1.0;
    for (std::size_t i = 1; i <= steps; ++i) {
        double beta = beta_start + (beta_end - beta_start) * (i - 1) / (steps - 1);
        alpha_bar *= 1.0 - beta;
        s.alphas[i] = std::sqrt(alpha_bar);
        s.sigmas[i] = std::sqrt(1.0 - alpha_bar);
    }
    return s;
}

ImageBatch add_noise(const ImageBatch& x0, std::size_t t, const Tensor& eps,
                     const NoiseSchedule& schedule) {
    if (t >= schedule.alphas.size())
        throw std::out_of_range("add_noise: t=" + std::to_string(t) + " outside schedule range");
    check_same_shape(x0.data, eps, "add_noise");
    double a = schedule.alphas[t], s = schedule.sigmas[t];
    ImageBatch out;
    out.range = ValueRange::Symmetric;
    out.dtype_hint = x0.dtype_hint;
    out.data = Tensor(x0.data.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a * x0.data[i] + s * eps[i];
    return out;
}

double c_weight(std::size_t t, const WeightingScheme& scheme, const NoiseSchedule& schedule) {
    if (t >= schedule.alphas.size())
        throw std::out_of_range("c_weight: t=" + std::to_string(t) + " outside schedule range");
    double a = schedule.alphas[t];
    switch (scheme.kind) {
        case WeightingKind::Exponential:
            return a;
        case WeightingKind::Sds:
            return a * a;
    }
    throw std::logic_error("c_weight: unknown weighting kind");
}

} // namespace gendd
