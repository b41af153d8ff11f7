#include "gendd/augment.hpp"

#include <cmath>
#include <stdexcept>

#include "gendd/resample.hpp"

namespace gendd {

void AugmentationSpec::validate() const {
    if (crop_size == 0) throw std::invalid_argument("AugmentationSpec: crop size must be positive");
    for (double p : {hflip_p, vflip_p, brightness_contrast_p, rotate_p, gamma_p}) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("AugmentationSpec: probabilities must be in [0,1]");
    }
}

nlohmann::json AugmentationSpec::to_json() const {
    return {{"crop_size", crop_size},
            {"hflip_p", hflip_p},
            {"vflip_p", vflip_p},
            {"brightness_contrast_p", brightness_contrast_p},
            {"rotate_p", rotate_p},
            {"rotate_limit_deg", rotate_limit_deg},
            {"gamma_p", gamma_p},
            {"contrast_range", {contrast_lo, contrast_hi}},
            {"brightness_limit", brightness_limit},
            {"gamma_range", {gamma_lo, gamma_hi}},
            {"seed", seed}};
}

namespace {
void check_single_image(const Tensor& img) {
    if (img.shape.size() != 3) throw std::invalid_argument("augment: expected [C, H, W] image");
}
} // namespace

Tensor crop(const Tensor& img, std::size_t oy, std::size_t ox, std::size_t size) {
    check_single_image(img);
    std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
    if (oy + size > h || ox + size > w)
        throw std::invalid_argument("crop: window exceeds image bounds");
    Tensor out({c, size, size});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x)
                out.data[(ch * size + y) * size + x] = img.data[(ch * h + oy + y) * w + ox + x];
    return out;
}

Tensor center_crop(const Tensor& img, std::size_t size) {
    std::size_t h = img.shape[1], w = img.shape[2];
    if (size > h || size > w) throw std::invalid_argument("center_crop: size exceeds image");
    return crop(img, (h - size) / 2, (w - size) / 2, size);
}

Tensor hflip(const Tensor& img) {
    check_single_image(img);
    std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
    Tensor out(img.shape);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                out.data[(ch * h + y) * w + x] = img.data[(ch * h + y) * w + (w - 1 - x)];
    return out;
}

Tensor vflip(const Tensor& img) {
    check_single_image(img);
    std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
    Tensor out(img.shape);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                out.data[(ch * h + y) * w + x] = img.data[(ch * h + (h - 1 - y)) * w + x];
    return out;
}

Tensor brightness_contrast(const Tensor& img, double alpha, double beta) {
    Tensor out(img.shape);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data[i] = std::clamp(alpha * img.data[i] + beta, 0.0, 1.0);
    return out;
}

namespace {
// reflect-101 fold of a continuous coordinate into [0, n-1]
double reflect_coord(double x, std::size_t n) {
    if (n == 1) return 0.0;
    double period = 2.0 * (n - 1);
    x = std::fmod(x, period);
    if (x < 0) x += period;
    return x > (n - 1) ? period - x : x;
}
} // namespace

Tensor rotate(const Tensor& img, double angle_deg) {
    check_single_image(img);
    std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
    double a = angle_deg * M_PI / 180.0;
    double cs = std::cos(a), sn = std::sin(a);
    double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    Tensor out(img.shape);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            // inverse map: output pixel pulled from rotated source position
            double dy = y - cy, dx = x - cx;
            double sy = reflect_coord(cy + (cs * dy + sn * dx), h);
            double sx = reflect_coord(cx + (-sn * dy + cs * dx), w);
            auto y0 = static_cast<std::size_t>(std::floor(sy));
            auto x0 = static_cast<std::size_t>(std::floor(sx));
            std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
            double ty = sy - y0, tx = sx - x0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double* p = &img.data[ch * h * w];
                double v = (1 - ty) * ((1 - tx) * p[y0 * w + x0] + tx * p[y0 * w + x1]) +
                           ty * ((1 - tx) * p[y1 * w + x0] + tx * p[y1 * w + x1]);
                out.data[(ch * h + y) * w + x] = v;
            }
        }
    }
    return out;
}

Tensor gamma_adjust(const Tensor& img, double gamma) {
    Tensor out(img.shape);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data[i] = std::pow(std::clamp(img.data[i], 0.0, 1.0), gamma);
    return out;
}

Tensor augment_one(const Tensor& img, const AugmentationSpec& spec, Rng& rng) {
    spec.validate();
    check_single_image(img);
    std::size_t h = img.shape[1], w = img.shape[2];
    if (h < spec.crop_size || w < spec.crop_size)
        throw std::invalid_argument("augment_one: image smaller than crop size");

    std::size_t oy = rng.uniform_int(h - spec.crop_size + 1);
    std::size_t ox = rng.uniform_int(w - spec.crop_size + 1);
    Tensor out = crop(img, oy, ox, spec.crop_size);

    if (rng.bernoulli(spec.hflip_p)) out = hflip(out);
    if (rng.bernoulli(spec.vflip_p)) out = vflip(out);
    if (rng.bernoulli(spec.brightness_contrast_p)) {
        double alpha = rng.uniform(spec.contrast_lo, spec.contrast_hi);
        double beta = rng.uniform(-spec.brightness_limit, spec.brightness_limit);
        out = brightness_contrast(out, alpha, beta);
    }
    if (rng.bernoulli(spec.rotate_p)) {
        double angle = rng.uniform(-spec.rotate_limit_deg, spec.rotate_limit_deg);
        out = rotate(out, angle);
    }
    if (rng.bernoulli(spec.gamma_p)) {
        double g = rng.uniform(spec.gamma_lo, spec.gamma_hi);
        out = gamma_adjust(out, g);
    }
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

std::size_t crop_source_size(std::size_t target) {
    return static_cast<std::size_t>(std::lround(target * 1.25));
}

DistilledDataset expand_dataset(const DistilledDataset& ds, const AugmentationSpec& spec,
                                const ExpansionPlan& plan) {
    ds.validate();
    spec.validate();
    plan.validate();

    // conform sources so random crops have translation slack
    std::size_t source_size = crop_source_size(spec.crop_size);
    ImageBatch sources = resample_square(ds.images, source_size);

    std::size_t n = ds.count(), factor = plan.factor, size = spec.crop_size;
    std::size_t c = ds.images.channels();
    DistilledDataset out;
    out.registry = ds.registry;
    out.ipc = ds.ipc * factor;
    out.images.range = ValueRange::Unit;
    out.images.data = Tensor({n * factor, c, size, size});
    out.labels.reserve(n * factor);
    out.provenance.reserve(n * factor);

    std::vector<std::size_t> within_class(ds.registry.count(), 0);
    std::size_t per = c * size * size;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t cls = ds.labels[i];
        std::size_t k = within_class[cls]++;
        Tensor src({c, source_size, source_size});
        std::copy(&sources.data.data[i * c * source_size * source_size],
                  &sources.data.data[(i + 1) * c * source_size * source_size], src.data.begin());
        for (std::size_t copy = 0; copy < factor; ++copy) {
            Tensor var;
            if (copy == 0) {
                var = center_crop(src, size);
            } else {
                Rng rng = Rng::derive(spec.seed, {cls, k, copy});
                var = augment_one(src, spec, rng);
            }
            std::copy(var.data.begin(), var.data.end(),
                      &out.images.data.data[(i * factor + copy) * per]);
            out.labels.push_back(cls);
            out.provenance.push_back(copy == 0 ? ds.provenance[i] : Provenance::Augmented);
        }
    }
    quantize_unit16(out.images);
    out.validate();
    return out;
}

} // namespace gendd
