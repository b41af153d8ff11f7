#include "gendd/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace gendd {

LinearPixelHeads::LinearPixelHeads(std::size_t heads, std::size_t input_dim)
    : weights({heads, input_dim}), biases({heads}) {}

HeadOutputs LinearPixelHeads::eval(const ImageBatch& x) {
    std::size_t n = x.count();
    std::size_t d = x.data.size() / std::max<std::size_t>(n, 1);
    std::size_t k = weights.shape[0];
    if (d != weights.shape[1]) throw std::invalid_argument("LinearPixelHeads: input dim mismatch");
    HeadOutputs out;
    out.values = Tensor({n, k});
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = &x.data.data[i * d];
        for (std::size_t j = 0; j < k; ++j) {
            double acc = biases[j];
            const double* wj = &weights[j * d];
            for (std::size_t e = 0; e < d; ++e) acc += wj[e] * xi[e];
            out.values.at2(i, j) = acc;
        }
    }
    return out;
}

Tensor LinearPixelHeads::input_gradient(const ImageBatch& x) {
    std::size_t n = x.count();
    std::size_t d = weights.shape[1];
    std::size_t k = weights.shape[0];
    Tensor g(x.data.shape);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t e = 0; e < d; ++e) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += weights[j * d + e];
            g[i * d + e] = acc;
        }
    return g;
}

double generator_adversarial_loss(const HeadOutputs& fake_heads) {
    fake_heads.validate();
    std::size_t n = fake_heads.count();
    if (n == 0) throw std::invalid_argument("generator_adversarial_loss: empty batch");
    double acc = 0.0;
    for (double v : fake_heads.values.data) acc += v;
    return -acc / static_cast<double>(n);
}

Tensor generator_adversarial_grad(const HeadOutputs& fake_heads) {
    std::size_t n = fake_heads.count();
    if (n == 0) throw std::invalid_argument("generator_adversarial_grad: empty batch");
    return Tensor::full(fake_heads.values.shape, -1.0 / static_cast<double>(n));
}

double r1_from_input_gradient(const Tensor& g) {
    std::size_t n = g.shape.empty() ? 0 : g.shape[0];
    if (n == 0) throw std::invalid_argument("r1_from_input_gradient: empty batch");
    std::size_t d = g.size() / n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t e = 0; e < d; ++e) {
            double v = g[i * d + e];
            sq += v * v;
        }
        acc += sq;
    }
    return acc / static_cast<double>(n);
}

double r1_penalty(InputDifferentiableHeads& heads, const ImageBatch& x0) {
    if (x0.count() == 0) throw std::invalid_argument("r1_penalty: empty batch");
    return r1_from_input_gradient(heads.input_gradient(x0));
}

double discriminator_hinge_loss(const HeadOutputs& real_heads, const HeadOutputs& fake_heads,
                                double r1, double gamma) {
    real_heads.validate();
    fake_heads.validate();
    if (real_heads.count() == 0 || fake_heads.count() == 0)
        throw std::invalid_argument("discriminator_hinge_loss: empty batch");
    if (gamma < 0 || r1 < 0)
        throw std::invalid_argument("discriminator_hinge_loss: gamma and r1 must be >= 0");
    double real_term = 0.0;
    for (double v : real_heads.values.data) real_term += std::max(0.0, 1.0 - v);
    real_term /= static_cast<double>(real_heads.count());
    double fake_term = 0.0;
    for (double v : fake_heads.values.data) fake_term += std::max(0.0, 1.0 + v);
    fake_term /= static_cast<double>(fake_heads.count());
    return real_term + gamma * r1 + fake_term;
}

Tensor hinge_grad_real(const HeadOutputs& real_heads) {
    std::size_t n = real_heads.count();
    if (n == 0) throw std::invalid_argument("hinge_grad_real: empty batch");
    Tensor g(real_heads.values.shape);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = real_heads.values[i] < 1.0 ? -1.0 / static_cast<double>(n) : 0.0;
    return g;
}

Tensor hinge_grad_fake(const HeadOutputs& fake_heads) {
    std::size_t n = fake_heads.count();
    if (n == 0) throw std::invalid_argument("hinge_grad_fake: empty batch");
    Tensor g(fake_heads.values.shape);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = fake_heads.values[i] > -1.0 ? 1.0 / static_cast<double>(n) : 0.0;
    return g;
}

double distillation_loss(const ImageBatch& student_out, const ImageBatch& teacher_out,
                         std::size_t t, const WeightingScheme& scheme,
                         const NoiseSchedule& schedule) {
    check_same_shape(student_out.data, teacher_out.data, "distillation_loss");
    if (student_out.data.empty()) throw std::invalid_argument("distillation_loss: empty batch");
    double c = c_weight(t, scheme, schedule);
    double acc = 0.0;
    for (std::size_t i = 0; i < student_out.data.size(); ++i) {
        double d = student_out.data[i] - teacher_out.data[i];
        acc += d * d;
    }
    return c * acc / static_cast<double>(student_out.data.size());
}

Tensor distillation_grad(const ImageBatch& student_out, const ImageBatch& teacher_out,
                         std::size_t t, const WeightingScheme& scheme,
                         const NoiseSchedule& schedule) {
    check_same_shape(student_out.data, teacher_out.data, "distillation_grad");
    double c = c_weight(t, scheme, schedule);
    double scale = 2.0 * c / static_cast<double>(student_out.data.size());
    Tensor g(student_out.data.shape);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = scale * (student_out.data[i] - teacher_out.data[i]);
    return g;
}

} // namespace gendd
