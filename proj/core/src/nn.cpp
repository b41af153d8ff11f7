#include "gendd/nn.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace gendd::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

void kaiming_uniform(Tensor& w, std::size_t fan_in, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
}

namespace {

void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            std::size_t pad, double* col, std::size_t oh, std::size_t ow) {
    // col layout: [c*k*k, oh*ow]
    std::size_t ohw = oh * ow;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                double* row = col + ((ch * k + ky) * k + kx) * ohw;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                        static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        for (std::size_t ox = 0; ox < ow; ++ox) row[oy * ow + ox] = 0.0;
                        continue;
                    }
                    const double* src = x + (ch * h + iy) * w;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) -
                                            static_cast<std::ptrdiff_t>(pad);
                        row[oy * ow + ox] =
                            (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[ix];
                    }
                }
            }
        }
    }
}

void col2im_accum(const double* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
                  std::size_t pad, double* x, std::size_t oh, std::size_t ow) {
    std::size_t ohw = oh * ow;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const double* row = col + ((ch * k + ky) * k + kx) * ohw;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                        static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    double* dst = x + (ch * h + iy) * w;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) -
                                            static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        dst[ix] += row[oy * ow + ox];
                    }
                }
            }
        }
    }
}

} // namespace

Conv2d::Conv2d(std::size_t in_ch_, std::size_t out_ch_, std::size_t ksize_, std::size_t pad_,
               Rng& rng)
    : weight({out_ch_, in_ch_ * ksize_ * ksize_}),
      bias({out_ch_}),
      in_ch(in_ch_),
      out_ch(out_ch_),
      ksize(ksize_),
      pad(pad_) {
    kaiming_uniform(weight.value, in_ch * ksize * ksize, rng);
}

namespace {
struct ConvDims {
    std::size_t n, h, w, oh, ow;
};

ConvDims conv_dims(const Tensor& x, std::size_t in_ch, std::size_t k, std::size_t pad) {
    if (x.shape.size() != 4 || x.shape[1] != in_ch)
        throw std::invalid_argument("Conv2d: bad input shape " + x.shape_str());
    ConvDims d;
    d.n = x.shape[0];
    d.h = x.shape[2];
    d.w = x.shape[3];
    if (d.h + 2 * pad < k || d.w + 2 * pad < k)
        throw std::invalid_argument("Conv2d: input smaller than kernel");
    d.oh = d.h + 2 * pad - k + 1;
    d.ow = d.w + 2 * pad - k + 1;
    return d;
}
} // namespace

Tensor Conv2d::apply(const Tensor& x) const {
    ConvDims d = conv_dims(x, in_ch, ksize, pad);
    std::size_t ckk = in_ch * ksize * ksize, ohw = d.oh * d.ow;
    Tensor y({d.n, out_ch, d.oh, d.ow});
    std::vector<double> col(ckk * ohw);
    MapConstMat W(weight.value.data.data(), out_ch, ckk);
    for (std::size_t i = 0; i < d.n; ++i) {
        im2col(&x.data[i * in_ch * d.h * d.w], in_ch, d.h, d.w, ksize, pad, col.data(), d.oh, d.ow);
        MapConstMat C(col.data(), ckk, ohw);
        MapMat Y(&y.data[i * out_ch * ohw], out_ch, ohw);
        Y.noalias() = W * C;
        for (std::size_t oc = 0; oc < out_ch; ++oc) Y.row(oc).array() += bias.value[oc];
    }
    return y;
}

Tensor Conv2d::apply_linear(const Tensor& x) const {
    ConvDims d = conv_dims(x, in_ch, ksize, pad);
    std::size_t ckk = in_ch * ksize * ksize, ohw = d.oh * d.ow;
    Tensor y({d.n, out_ch, d.oh, d.ow});
    std::vector<double> col(ckk * ohw);
    MapConstMat W(weight.value.data.data(), out_ch, ckk);
    for (std::size_t i = 0; i < d.n; ++i) {
        im2col(&x.data[i * in_ch * d.h * d.w], in_ch, d.h, d.w, ksize, pad, col.data(), d.oh, d.ow);
        MapConstMat C(col.data(), ckk, ohw);
        MapMat Y(&y.data[i * out_ch * ohw], out_ch, ohw);
        Y.noalias() = W * C;
    }
    return y;
}

Tensor Conv2d::forward(const Tensor& x) {
    input_cache_ = x;
    return apply(x);
}

Tensor Conv2d::backward(const Tensor& dy) {
    const Tensor& x = input_cache_;
    ConvDims d = conv_dims(x, in_ch, ksize, pad);
    std::size_t ckk = in_ch * ksize * ksize, ohw = d.oh * d.ow;
    Tensor dx(x.shape);
    std::vector<double> col(ckk * ohw);
    std::vector<double> dcol(ckk * ohw);
    MapConstMat W(weight.value.data.data(), out_ch, ckk);
    MapMat dW(weight.grad.data.data(), out_ch, ckk);
    for (std::size_t i = 0; i < d.n; ++i) {
        im2col(&x.data[i * in_ch * d.h * d.w], in_ch, d.h, d.w, ksize, pad, col.data(), d.oh, d.ow);
        MapConstMat C(col.data(), ckk, ohw);
        MapConstMat dY(&dy.data[i * out_ch * ohw], out_ch, ohw);
        dW.noalias() += dY * C.transpose();
        for (std::size_t oc = 0; oc < out_ch; ++oc) bias.grad[oc] += dY.row(oc).sum();
        MapMat dC(dcol.data(), ckk, ohw);
        dC.noalias() = W.transpose() * dY;
        col2im_accum(dcol.data(), in_ch, d.h, d.w, ksize, pad, &dx.data[i * in_ch * d.h * d.w],
                     d.oh, d.ow);
    }
    return dx;
}

Tensor Conv2d::input_backward(const Tensor& x_shape_ref, const Tensor& dy) const {
    ConvDims d = conv_dims(x_shape_ref, in_ch, ksize, pad);
    std::size_t ckk = in_ch * ksize * ksize, ohw = d.oh * d.ow;
    Tensor dx(x_shape_ref.shape);
    std::vector<double> dcol(ckk * ohw);
    MapConstMat W(weight.value.data.data(), out_ch, ckk);
    for (std::size_t i = 0; i < d.n; ++i) {
        MapConstMat dY(&dy.data[i * out_ch * ohw], out_ch, ohw);
        MapMat dC(dcol.data(), ckk, ohw);
        dC.noalias() = W.transpose() * dY;
        col2im_accum(dcol.data(), in_ch, d.h, d.w, ksize, pad, &dx.data[i * in_ch * d.h * d.w],
                     d.oh, d.ow);
    }
    return dx;
}

void Conv2d::accumulate_param_grads(const Tensor& x, const Tensor& dy) {
    ConvDims d = conv_dims(x, in_ch, ksize, pad);
    std::size_t ckk = in_ch * ksize * ksize, ohw = d.oh * d.ow;
    std::vector<double> col(ckk * ohw);
    MapMat dW(weight.grad.data.data(), out_ch, ckk);
    for (std::size_t i = 0; i < d.n; ++i) {
        im2col(&x.data[i * in_ch * d.h * d.w], in_ch, d.h, d.w, ksize, pad, col.data(), d.oh, d.ow);
        MapConstMat C(col.data(), ckk, ohw);
        MapConstMat dY(&dy.data[i * out_ch * ohw], out_ch, ohw);
        dW.noalias() += dY * C.transpose();
        for (std::size_t oc = 0; oc < out_ch; ++oc) bias.grad[oc] += dY.row(oc).sum();
    }
}

Linear::Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : weight({out_dim, in_dim}), bias({out_dim}) {
    kaiming_uniform(weight.value, in_dim, rng);
}

Tensor Linear::forward(const Tensor& x) {
    input_cache_ = x;
    std::size_t n = x.shape[0], in = weight.value.shape[1], out = weight.value.shape[0];
    if (x.shape.size() != 2 || x.shape[1] != in)
        throw std::invalid_argument("Linear: bad input shape " + x.shape_str());
    Tensor y({n, out});
    MapConstMat X(x.data.data(), n, in);
    MapConstMat W(weight.value.data.data(), out, in);
    MapMat Y(y.data.data(), n, out);
    Y.noalias() = X * W.transpose();
    for (std::size_t j = 0; j < out; ++j) Y.col(j).array() += bias.value[j];
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    const Tensor& x = input_cache_;
    std::size_t n = x.shape[0], in = weight.value.shape[1], out = weight.value.shape[0];
    MapConstMat X(x.data.data(), n, in);
    MapConstMat dY(dy.data.data(), n, out);
    MapMat dW(weight.grad.data.data(), out, in);
    dW.noalias() += dY.transpose() * X;
    for (std::size_t j = 0; j < out; ++j) bias.grad[j] += dY.col(j).sum();
    Tensor dx(x.shape);
    MapMat dX(dx.data.data(), n, in);
    MapConstMat W(weight.value.data.data(), out, in);
    dX.noalias() = dY * W;
    return dx;
}

InstanceNorm2d::InstanceNorm2d(std::size_t channels) : gamma({channels}), beta({channels}) {
    gamma.value.fill(1.0);
}

Tensor InstanceNorm2d::forward(const Tensor& x) {
    std::size_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
    Tensor y(x.shape);
    xhat_cache_ = Tensor(x.shape);
    inv_std_cache_ = Tensor({n, c});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* src = &x.data[(i * c + ch) * hw];
            double mu = 0.0;
            for (std::size_t p = 0; p < hw; ++p) mu += src[p];
            mu /= static_cast<double>(hw);
            double var = 0.0;
            for (std::size_t p = 0; p < hw; ++p) {
                double d = src[p] - mu;
                var += d * d;
            }
            var /= static_cast<double>(hw);
            double inv = 1.0 / std::sqrt(var + kEps);
            inv_std_cache_.at2(i, ch) = inv;
            double* xh = &xhat_cache_.data[(i * c + ch) * hw];
            double* dst = &y.data[(i * c + ch) * hw];
            double g = gamma.value[ch], b = beta.value[ch];
            for (std::size_t p = 0; p < hw; ++p) {
                xh[p] = (src[p] - mu) * inv;
                dst[p] = g * xh[p] + b;
            }
        }
    }
    return y;
}

Tensor InstanceNorm2d::backward(const Tensor& dy) {
    std::size_t n = dy.shape[0], c = dy.shape[1], hw = dy.shape[2] * dy.shape[3];
    Tensor dx(dy.shape);
    double inv_hw = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* dyp = &dy.data[(i * c + ch) * hw];
            const double* xh = &xhat_cache_.data[(i * c + ch) * hw];
            double g = gamma.value[ch];
            double inv = inv_std_cache_.at2(i, ch);
            double sum_dy = 0.0, sum_dy_xh = 0.0;
            for (std::size_t p = 0; p < hw; ++p) {
                sum_dy += dyp[p];
                sum_dy_xh += dyp[p] * xh[p];
                // param grads accumulate over everything
            }
            gamma.grad[ch] += sum_dy_xh;
            beta.grad[ch] += sum_dy;
            double* dxp = &dx.data[(i * c + ch) * hw];
            for (std::size_t p = 0; p < hw; ++p) {
                dxp[p] = g * inv * (dyp[p] - inv_hw * sum_dy - xh[p] * inv_hw * sum_dy_xh);
            }
        }
    }
    return dx;
}

Tensor ReLU::forward(const Tensor& x) {
    mask_ = Tensor(x.shape);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        bool on = x.data[i] > 0.0;
        mask_.data[i] = on ? 1.0 : 0.0;
        y.data[i] = on ? x.data[i] : 0.0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& dy) const {
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] = dy.data[i] * mask_.data[i];
    return dx;
}

Tensor SiLU::forward(const Tensor& x) {
    input_cache_ = x;
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x.data[i]));
        y.data[i] = x.data[i] * s;
    }
    return y;
}

Tensor SiLU::backward(const Tensor& dy) const {
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) {
        double x = input_cache_.data[i];
        double s = 1.0 / (1.0 + std::exp(-x));
        dx.data[i] = dy.data[i] * (s + x * s * (1.0 - s));
    }
    return dx;
}

Tensor Tanh::forward(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = std::tanh(x.data[i]);
    output_cache_ = y;
    return y;
}

Tensor Tanh::backward(const Tensor& dy) const {
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) {
        double t = output_cache_.data[i];
        dx.data[i] = dy.data[i] * (1.0 - t * t);
    }
    return dx;
}

Tensor AvgPool2d::apply(const Tensor& x) {
    std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    std::size_t oh = h / 2, ow = w / 2;
    Tensor y({n, c, oh, ow});
    for (std::size_t i = 0; i < n * c; ++i) {
        const double* src = &x.data[i * h * w];
        double* dst = &y.data[i * oh * ow];
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                dst[oy * ow + ox] = 0.25 * (src[(2 * oy) * w + 2 * ox] + src[(2 * oy) * w + 2 * ox + 1] +
                                            src[(2 * oy + 1) * w + 2 * ox] +
                                            src[(2 * oy + 1) * w + 2 * ox + 1]);
    }
    return y;
}

Tensor AvgPool2d::input_backward(const std::vector<std::size_t>& in_shape, const Tensor& dy) {
    std::size_t n = in_shape[0], c = in_shape[1], h = in_shape[2], w = in_shape[3];
    std::size_t oh = h / 2, ow = w / 2;
    Tensor dx(in_shape);
    for (std::size_t i = 0; i < n * c; ++i) {
        const double* src = &dy.data[i * oh * ow];
        double* dst = &dx.data[i * h * w];
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double v = 0.25 * src[oy * ow + ox];
                dst[(2 * oy) * w + 2 * ox] += v;
                dst[(2 * oy) * w + 2 * ox + 1] += v;
                dst[(2 * oy + 1) * w + 2 * ox] += v;
                dst[(2 * oy + 1) * w + 2 * ox + 1] += v;
            }
    }
    return dx;
}

Tensor AvgPool2d::forward(const Tensor& x) {
    in_shape_ = x.shape;
    return apply(x);
}

Tensor AvgPool2d::backward(const Tensor& dy) const { return input_backward(in_shape_, dy); }

Tensor GlobalAvgPool::forward(const Tensor& x) {
    in_shape_ = x.shape;
    std::size_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
    Tensor y({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += x.data[i * hw + p];
        y.data[i] = acc / static_cast<double>(hw);
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) const {
    std::size_t hw = in_shape_[2] * in_shape_[3];
    Tensor dx(in_shape_);
    double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < dy.size(); ++i)
        for (std::size_t p = 0; p < hw; ++p) dx.data[i * hw + p] = dy.data[i] * inv;
    return dx;
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels,
                             Tensor* dlogits) {
    std::size_t n = logits.shape[0], k = logits.shape[1];
    if (labels.size() != n) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    if (dlogits) *dlogits = Tensor(logits.shape);
    double loss = 0.0;
    std::vector<double> probs(k);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &logits.data[i * k];
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            probs[j] = std::exp(row[j] - mx);
            z += probs[j];
        }
        loss += -(row[labels[i]] - mx - std::log(z));
        if (dlogits) {
            double* drow = &dlogits->data[i * k];
            for (std::size_t j = 0; j < k; ++j)
                drow[j] = (probs[j] / z - (j == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
        }
    }
    return loss / static_cast<double>(n);
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    std::size_t k = logits.shape[1];
    const double* r = &logits.data[row * k];
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (r[j] > r[best]) best = j;
    return best;
}

SgdMomentum::SgdMomentum(std::vector<Param*> params, double lr_, double momentum,
                         double weight_decay)
    : lr(lr_), params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    for (auto* p : params_) velocity_.emplace_back(p->value.shape);
}

void SgdMomentum::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        Tensor& v = velocity_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            double g = p.grad[j] + weight_decay_ * p.value[j];
            v[j] = momentum_ * v[j] + g;
            p.value[j] -= lr * v[j];
        }
    }
}

void SgdMomentum::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

AdamW::AdamW(std::vector<Param*> params, double lr_, double beta1, double beta2, double eps,
             double weight_decay)
    : lr(lr_), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps),
      weight_decay_(weight_decay) {
    for (auto* p : params_) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
    }
}

void AdamW::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            double g = p.grad[j];
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            double mh = m_[i][j] / bc1;
            double vh = v_[i][j] / bc2;
            p.value[j] -= lr * (mh / (std::sqrt(vh) + eps_) + weight_decay_ * p.value[j]);
        }
    }
}

void AdamW::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

std::uint64_t params_checksum(const std::vector<Param*>& params) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (const auto* p : params) {
        std::uint64_t c = tensor_checksum(p->value);
        h ^= c + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

} // namespace gendd::nn
