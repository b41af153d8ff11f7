#include "gendd/resample.hpp"

#include <algorithm>
#include <cmath>

namespace gendd {

namespace {

// Antialiased area average: each destination pixel integrates the exact
// fractional source rectangle it covers.
void area_downscale(const double* src, std::size_t src_h, std::size_t src_w,
                    double* dst, std::size_t dst_h, std::size_t dst_w) {
    double sy = static_cast<double>(src_h) / dst_h;
    double sx = static_cast<double>(src_w) / dst_w;
    for (std::size_t oy = 0; oy < dst_h; ++oy) {
        double y0 = oy * sy, y1 = (oy + 1) * sy;
        std::size_t iy0 = static_cast<std::size_t>(std::floor(y0));
        std::size_t iy1 = std::min(src_h, static_cast<std::size_t>(std::ceil(y1)));
        for (std::size_t ox = 0; ox < dst_w; ++ox) {
            double x0 = ox * sx, x1 = (ox + 1) * sx;
            std::size_t ix0 = static_cast<std::size_t>(std::floor(x0));
            std::size_t ix1 = std::min(src_w, static_cast<std::size_t>(std::ceil(x1)));
            double acc = 0.0, area = 0.0;
            for (std::size_t iy = iy0; iy < iy1; ++iy) {
                double wy = std::min<double>(iy + 1.0, y1) - std::max<double>(iy, y0);
                for (std::size_t ix = ix0; ix < ix1; ++ix) {
                    double wx = std::min<double>(ix + 1.0, x1) - std::max<double>(ix, x0);
                    acc += wy * wx * src[iy * src_w + ix];
                    area += wy * wx;
                }
            }
            dst[oy * dst_w + ox] = acc / area;
        }
    }
}

void bilinear_upscale(const double* src, std::size_t src_h, std::size_t src_w,
                      double* dst, std::size_t dst_h, std::size_t dst_w) {
    // half-pixel-centered sampling
    double sy = static_cast<double>(src_h) / dst_h;
    double sx = static_cast<double>(src_w) / dst_w;
    for (std::size_t oy = 0; oy < dst_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src_h - 1));
        auto y0 = static_cast<std::size_t>(std::floor(fy));
        std::size_t y1 = std::min(y0 + 1, src_h - 1);
        double ty = fy - y0;
        for (std::size_t ox = 0; ox < dst_w; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src_w - 1));
            auto x0 = static_cast<std::size_t>(std::floor(fx));
            std::size_t x1 = std::min(x0 + 1, src_w - 1);
            double tx = fx - x0;
            double v = (1 - ty) * ((1 - tx) * src[y0 * src_w + x0] + tx * src[y0 * src_w + x1]) +
                       ty * ((1 - tx) * src[y1 * src_w + x0] + tx * src[y1 * src_w + x1]);
            dst[oy * dst_w + ox] = v;
        }
    }
}

} // namespace

void resample_plane(const double* src, std::size_t src_h, std::size_t src_w,
                    double* dst, std::size_t dst_h, std::size_t dst_w) {
    if (dst_h == src_h && dst_w == src_w) {
        std::copy(src, src + src_h * src_w, dst);
    } else if (dst_h <= src_h && dst_w <= src_w) {
        area_downscale(src, src_h, src_w, dst, dst_h, dst_w);
    } else {
        bilinear_upscale(src, src_h, src_w, dst, dst_h, dst_w);
    }
}

ImageBatch resample_square(const ImageBatch& batch, std::size_t target) {
    if (target == 0) throw std::invalid_argument("resample_square: target must be positive");
    std::size_t n = batch.count(), c = batch.channels();
    std::size_t h = batch.height(), w = batch.width();
    if (h == target && w == target) return batch;

    ImageBatch out;
    out.range = batch.range;
    out.dtype_hint = batch.dtype_hint;
    out.data = Tensor({n, c, target, target});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* src = &batch.data.data[((i * c + ch) * h) * w];
            double* dst = &out.data.data[((i * c + ch) * target) * target];
            resample_plane(src, h, w, dst, target, target);
        }
    }
    return out;
}

} // namespace gendd
