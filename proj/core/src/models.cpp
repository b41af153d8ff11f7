#include "gendd/models.hpp"

#include <cmath>
#include <stdexcept>

namespace gendd {

using nn::Param;

namespace {
Rng seeded(std::uint64_t seed, std::uint64_t salt) { return Rng::derive(seed, {salt}); }
} // namespace

CondDenoiser::CondDenoiser(std::size_t channels, std::size_t num_classes, std::size_t hidden,
                           std::size_t emb_dim, std::uint64_t seed)
    : channels_(channels),
      num_classes_(num_classes),
      hidden_(hidden),
      emb_dim_(emb_dim),
      init_rng_(seeded(seed, 1)),
      class_table_({num_classes + 1, emb_dim}),
      emb_linear_(emb_dim, hidden, init_rng_),
      conv1_(channels, hidden, 3, 1, init_rng_),
      conv2_(hidden, hidden, 3, 1, init_rng_),
      conv3_(hidden, channels, 3, 1, init_rng_) {
    for (double& v : class_table_.value.data) v = 0.02 * init_rng_.normal();
}

Tensor CondDenoiser::timestep_embedding(std::size_t t) const {
    Tensor e({emb_dim_});
    std::size_t half = emb_dim_ / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        e[i] = std::sin(t * freq);
        e[half + i] = std::cos(t * freq);
    }
    return e;
}

Tensor CondDenoiser::forward(const Tensor& x, std::size_t t, const std::vector<std::size_t>& cond) {
    std::size_t n = x.shape[0];
    if (cond.size() != n) throw std::invalid_argument("CondDenoiser: cond count mismatch");
    Tensor temb = timestep_embedding(t);
    emb_in_cache_ = Tensor({n, emb_dim_});
    cond_cache_ = cond;
    for (std::size_t i = 0; i < n; ++i) {
        if (cond[i] > num_classes_) throw std::invalid_argument("CondDenoiser: cond id out of range");
        for (std::size_t j = 0; j < emb_dim_; ++j)
            emb_in_cache_.at2(i, j) = temb[j] + class_table_.value[cond[i] * emb_dim_ + j];
    }
    Tensor e = emb_act_.forward(emb_linear_.forward(emb_in_cache_)); // [N, hidden]

    Tensor h1 = conv1_.forward(x);
    std::size_t hw = h1.shape[2] * h1.shape[3];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < hidden_; ++c) {
            double b = e.at2(i, c);
            double* p = &h1.data[(i * hidden_ + c) * hw];
            for (std::size_t q = 0; q < hw; ++q) p[q] += b;
        }
    Tensor a1 = act1_.forward(h1);
    Tensor a2 = act2_.forward(conv2_.forward(a1));
    return out_act_.forward(conv3_.forward(a2));
}

Tensor CondDenoiser::backward(const Tensor& dy) {
    Tensor d = out_act_.backward(dy);
    d = conv3_.backward(d);
    d = act2_.backward(d);
    d = conv2_.backward(d);
    d = act1_.backward(d);

    // split the embedding-bias path off the conv1 pre-activation gradient
    std::size_t n = d.shape[0], hw = d.shape[2] * d.shape[3];
    Tensor de({n, hidden_});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < hidden_; ++c) {
            double acc = 0.0;
            const double* p = &d.data[(i * hidden_ + c) * hw];
            for (std::size_t q = 0; q < hw; ++q) acc += p[q];
            de.at2(i, c) = acc;
        }
    Tensor dx = conv1_.backward(d);

    Tensor dlin = emb_act_.backward(de);
    Tensor demb_in = emb_linear_.backward(dlin);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < emb_dim_; ++j)
            class_table_.grad[cond_cache_[i] * emb_dim_ + j] += demb_in.at2(i, j);
    return dx;
}

std::vector<Param*> CondDenoiser::parameters() {
    return {&class_table_,        &emb_linear_.weight, &emb_linear_.bias, &conv1_.weight,
            &conv1_.bias,         &conv2_.weight,      &conv2_.bias,      &conv3_.weight,
            &conv3_.bias};
}

void CondDenoiser::copy_parameters_from(const CondDenoiser& other) {
    auto src = const_cast<CondDenoiser&>(other).parameters();
    auto dst = parameters();
    if (src.size() != dst.size()) throw std::invalid_argument("copy_parameters_from: model mismatch");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (!src[i]->value.same_shape(dst[i]->value))
            throw std::invalid_argument("copy_parameters_from: parameter shape mismatch");
        dst[i]->value = src[i]->value;
    }
}

nlohmann::json CondDenoiser::state_to_json() const {
    auto* self = const_cast<CondDenoiser*>(this);
    nlohmann::json j;
    j["channels"] = channels_;
    j["num_classes"] = num_classes_;
    j["hidden"] = hidden_;
    j["emb_dim"] = emb_dim_;
    j["params"] = params_to_json(self->parameters());
    return j;
}

void CondDenoiser::load_state(const nlohmann::json& j) {
    if (j.at("channels") != channels_ || j.at("num_classes") != num_classes_ ||
        j.at("hidden") != hidden_ || j.at("emb_dim") != emb_dim_)
        throw std::invalid_argument("CondDenoiser::load_state: architecture mismatch");
    params_from_json(j.at("params"), parameters());
}

FeatureEncoder::FeatureEncoder(std::size_t channels, std::size_t width, std::uint64_t seed)
    : channels_(channels),
      width_(width),
      init_rng_(seeded(seed, 11)),
      conv1_(channels, width, 3, 1, init_rng_),
      conv2_(width, 2 * width, 3, 1, init_rng_) {}

std::size_t FeatureEncoder::tap_dim(std::size_t k, std::size_t h, std::size_t w) const {
    if (k == 0) return width_ * h * w;
    return 2 * width_ * (h / 2) * (w / 2);
}

FeatureEncoder::Acts FeatureEncoder::forward_taps(const Tensor& x) const {
    Acts acts;
    acts.x_shape = x.shape;
    std::size_t n = x.shape[0];

    Tensor pre1 = conv1_.apply(x);
    acts.mask1 = Tensor(pre1.shape);
    Tensor a1(pre1.shape);
    for (std::size_t i = 0; i < pre1.size(); ++i) {
        bool on = pre1.data[i] > 0.0;
        acts.mask1.data[i] = on ? 1.0 : 0.0;
        a1.data[i] = on ? pre1.data[i] : 0.0;
    }
    acts.pool_in_shape = a1.shape;

    Tensor p = nn::AvgPool2d::apply(a1);
    Tensor pre2 = conv2_.apply(p);
    acts.mask2 = Tensor(pre2.shape);
    Tensor a2(pre2.shape);
    for (std::size_t i = 0; i < pre2.size(); ++i) {
        bool on = pre2.data[i] > 0.0;
        acts.mask2.data[i] = on ? 1.0 : 0.0;
        a2.data[i] = on ? pre2.data[i] : 0.0;
    }

    Tensor tap1 = a1;
    tap1.shape = {n, a1.size() / std::max<std::size_t>(n, 1)};
    Tensor tap2 = a2;
    tap2.shape = {n, a2.size() / std::max<std::size_t>(n, 1)};
    acts.taps = {std::move(tap1), std::move(tap2)};
    return acts;
}

Tensor FeatureEncoder::vjp(const Acts& acts, const std::vector<Tensor>& tap_cotangents) const {
    // tap2 path
    Tensor da2 = tap_cotangents[1];
    da2.shape = acts.mask2.shape;
    Tensor dpre2(da2.shape);
    for (std::size_t i = 0; i < da2.size(); ++i) dpre2.data[i] = da2.data[i] * acts.mask2.data[i];

    std::vector<std::size_t> p_shape = {acts.pool_in_shape[0], acts.pool_in_shape[1],
                                        acts.pool_in_shape[2] / 2, acts.pool_in_shape[3] / 2};
    Tensor p_ref(p_shape);
    Tensor dp = conv2_.input_backward(p_ref, dpre2);
    Tensor da1 = nn::AvgPool2d::input_backward(acts.pool_in_shape, dp);

    // tap1 cotangent joins after relu1
    const Tensor& cot1 = tap_cotangents[0];
    for (std::size_t i = 0; i < da1.size(); ++i) da1.data[i] += cot1.data[i];

    Tensor dpre1(da1.shape);
    for (std::size_t i = 0; i < da1.size(); ++i) dpre1.data[i] = da1.data[i] * acts.mask1.data[i];
    Tensor x_ref(acts.x_shape);
    return conv1_.input_backward(x_ref, dpre1);
}

std::vector<Tensor> FeatureEncoder::jvp(const Acts& acts, const Tensor& dx) const {
    std::size_t n = acts.x_shape[0];
    Tensor u1 = conv1_.apply_linear(dx);
    Tensor ta1(u1.shape);
    for (std::size_t i = 0; i < u1.size(); ++i) ta1.data[i] = u1.data[i] * acts.mask1.data[i];
    Tensor t1 = ta1;
    t1.shape = {n, ta1.size() / std::max<std::size_t>(n, 1)};

    Tensor up = nn::AvgPool2d::apply(ta1);
    Tensor u2 = conv2_.apply_linear(up);
    Tensor ta2(u2.shape);
    for (std::size_t i = 0; i < u2.size(); ++i) ta2.data[i] = u2.data[i] * acts.mask2.data[i];
    Tensor t2 = ta2;
    t2.shape = {n, ta2.size() / std::max<std::size_t>(n, 1)};
    return {std::move(t1), std::move(t2)};
}

Tensor FeatureEncoder::backward_params(const Tensor& x, const Acts& acts,
                                       const std::vector<Tensor>& tap_cotangents) {
    // recompute the pooled intermediate (tap1 holds the post-relu conv1 output)
    Tensor a1 = acts.taps[0];
    a1.shape = acts.pool_in_shape;
    Tensor p = nn::AvgPool2d::apply(a1);

    Tensor da2 = tap_cotangents[1];
    da2.shape = acts.mask2.shape;
    Tensor dpre2(da2.shape);
    for (std::size_t i = 0; i < da2.size(); ++i) dpre2.data[i] = da2.data[i] * acts.mask2.data[i];
    conv2_.accumulate_param_grads(p, dpre2);

    Tensor dp = conv2_.input_backward(p, dpre2);
    Tensor da1 = nn::AvgPool2d::input_backward(acts.pool_in_shape, dp);
    const Tensor& cot1 = tap_cotangents[0];
    for (std::size_t i = 0; i < da1.size(); ++i) da1.data[i] += cot1.data[i];
    Tensor dpre1(da1.shape);
    for (std::size_t i = 0; i < da1.size(); ++i) dpre1.data[i] = da1.data[i] * acts.mask1.data[i];
    conv1_.accumulate_param_grads(x, dpre1);
    return conv1_.input_backward(x, dpre1);
}

std::vector<Param*> FeatureEncoder::parameters() {
    return {&conv1_.weight, &conv1_.bias, &conv2_.weight, &conv2_.bias};
}

std::uint64_t FeatureEncoder::checksum() const {
    return nn::params_checksum(const_cast<FeatureEncoder*>(this)->parameters());
}

double pretrain_feature_encoder(FeatureEncoder& encoder, const ImageBatch& images,
                                const std::vector<std::size_t>& labels, std::size_t num_classes,
                                std::size_t steps, std::size_t batch_size, double lr,
                                std::uint64_t seed) {
    std::size_t n = images.count();
    if (n == 0) throw std::invalid_argument("pretrain_feature_encoder: empty dataset");
    batch_size = std::min(batch_size, n);

    std::size_t h = images.height(), w = images.width();
    std::size_t feat_dim = encoder.tap_dim(1, h, w);
    Rng init = Rng::derive(seed, {21});
    nn::Linear head(feat_dim, num_classes, init);

    auto enc_params = encoder.parameters();
    std::vector<Param*> all = enc_params;
    all.push_back(&head.weight);
    all.push_back(&head.bias);
    nn::AdamW opt(all, lr);

    Rng rng = Rng::derive(seed, {22});
    double last_loss = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
        Tensor xb({batch_size, images.channels(), h, w});
        std::vector<std::size_t> yb(batch_size);
        for (std::size_t b = 0; b < batch_size; ++b) {
            std::size_t idx = rng.uniform_int(n);
            yb[b] = labels[idx];
            std::copy(&images.data.data[idx * images.channels() * h * w],
                      &images.data.data[(idx + 1) * images.channels() * h * w],
                      &xb.data[b * images.channels() * h * w]);
        }
        // forward through the encoder body, training both taps' conv weights
        auto acts = encoder.forward_taps(xb);
        Tensor logits = head.forward(acts.taps[1]);
        Tensor dlogits;
        last_loss = nn::softmax_cross_entropy(logits, yb, &dlogits);

        opt.zero_grad();
        Tensor dtap2 = head.backward(dlogits);
        // tap1 cotangent is zero for the classifier objective
        std::vector<Tensor> cots = {Tensor({batch_size, encoder.tap_dim(0, h, w)}), dtap2};
        encoder.backward_params(xb, acts, cots);
        opt.step();
    }
    return last_loss;
}

DiscriminatorStack::DiscriminatorStack(FeatureEncoder* encoder, std::size_t channels,
                                       std::size_t resolution, std::uint64_t seed)
    : encoder_(encoder) {
    (void)channels;
    for (std::size_t k = 0; k < FeatureEncoder::kTaps; ++k) {
        std::size_t dim = encoder_->tap_dim(k, resolution, resolution);
        weights_.emplace_back(std::vector<std::size_t>{dim});
        biases_.emplace_back(std::vector<std::size_t>{1});
        Rng r = Rng::derive(seed, {31 + k});
        for (double& v : weights_.back().value.data)
            v = r.normal() / std::sqrt(static_cast<double>(dim));
    }
}

HeadOutputs DiscriminatorStack::heads_from_acts(const FeatureEncoder::Acts& acts) const {
    std::size_t n = acts.taps[0].shape[0];
    HeadOutputs out;
    out.values = Tensor({n, weights_.size()});
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        const Tensor& f = acts.taps[k];
        std::size_t d = f.shape[1];
        for (std::size_t i = 0; i < n; ++i) {
            double acc = biases_[k].value[0];
            for (std::size_t e = 0; e < d; ++e) acc += weights_[k].value[e] * f.at2(i, e);
            out.values.at2(i, k) = acc;
        }
    }
    return out;
}

HeadOutputs DiscriminatorStack::eval(const ImageBatch& x) {
    return heads_from_acts(encoder_->forward_taps(x.data));
}

Tensor DiscriminatorStack::summed_head_input_gradient(const FeatureEncoder::Acts& acts) const {
    std::size_t n = acts.taps[0].shape[0];
    std::vector<Tensor> cots;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        Tensor c({n, weights_[k].value.size()});
        for (std::size_t i = 0; i < n; ++i)
            std::copy(weights_[k].value.data.begin(), weights_[k].value.data.end(),
                      &c.data[i * weights_[k].value.size()]);
        cots.push_back(std::move(c));
    }
    return encoder_->vjp(acts, cots);
}

Tensor DiscriminatorStack::input_gradient(const ImageBatch& x) {
    return summed_head_input_gradient(encoder_->forward_taps(x.data));
}

void DiscriminatorStack::head_backward(const FeatureEncoder::Acts& acts, const Tensor& dhead) {
    std::size_t n = dhead.shape[0];
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        const Tensor& f = acts.taps[k];
        std::size_t d = f.shape[1];
        for (std::size_t i = 0; i < n; ++i) {
            double g = dhead.at2(i, k);
            if (g == 0.0) continue;
            for (std::size_t e = 0; e < d; ++e) weights_[k].grad[e] += g * f.at2(i, e);
            biases_[k].grad[0] += g;
        }
    }
}

Tensor DiscriminatorStack::input_backward(const FeatureEncoder::Acts& acts,
                                          const Tensor& dhead) const {
    std::size_t n = dhead.shape[0];
    std::vector<Tensor> cots;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        std::size_t d = weights_[k].value.size();
        Tensor c({n, d});
        for (std::size_t i = 0; i < n; ++i) {
            double g = dhead.at2(i, k);
            for (std::size_t e = 0; e < d; ++e) c.data[i * d + e] = g * weights_[k].value[e];
        }
        cots.push_back(std::move(c));
    }
    return encoder_->vjp(acts, cots);
}

void DiscriminatorStack::accumulate_r1_grad(const FeatureEncoder::Acts& acts, const Tensor& g,
                                            double scale) {
    std::size_t n = acts.taps[0].shape[0];
    std::vector<Tensor> tangents = encoder_->jvp(acts, g);
    double factor = scale * 2.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        const Tensor& t = tangents[k];
        std::size_t d = t.shape[1];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t e = 0; e < d; ++e) weights_[k].grad[e] += factor * t.at2(i, e);
    }
}

std::vector<Param*> DiscriminatorStack::parameters() {
    std::vector<Param*> out;
    for (auto& w : weights_) out.push_back(&w);
    for (auto& b : biases_) out.push_back(&b);
    return out;
}

nlohmann::json params_to_json(const std::vector<Param*>& params) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto* p : params) {
        arr.push_back({{"shape", p->value.shape}, {"data", p->value.data}});
    }
    return arr;
}

void params_from_json(const nlohmann::json& j, const std::vector<Param*>& params) {
    if (j.size() != params.size()) throw std::invalid_argument("params_from_json: count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto shape = j[i].at("shape").get<std::vector<std::size_t>>();
        if (shape != params[i]->value.shape)
            throw std::invalid_argument("params_from_json: shape mismatch at " + std::to_string(i));
        params[i]->value.data = j[i].at("data").get<std::vector<double>>();
    }
}

} // namespace gendd
